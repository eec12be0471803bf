"""Donaldson's functional restricted to diagonal metrics, in closed form.

For a trace-zero potential xi = (f_1, ..., f_r), i.e. h = (e^{f_1} k_1, ..., e^{f_r} k_r),

    M(xi) = int 1/4 |grad xi|^2 + sum_{active} int 1/2 c_{i,j} (e^{(v_{i,j}, xi)} - 1) + sum_j int a_j f_j

with M(0) = 0. Its L^2 gradient is half the residual

    R(xi) = Delta xi + sum c_{i,j} e^{(v_{i,j}, xi)} v_{i,j} - b.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .grid import dirichlet, integrate, inner, l2_norm, laplacian
from .problem import HiggsProblem

# exp(709.78) is the largest finite double
EXP_LIMIT = 700.0


class ExponentialOverflow(ArithmeticError):
    def __init__(self, pair, max_exponent: float):
        self.pair = pair
        self.max_exponent = max_exponent
        super().__init__(f"exponent {max_exponent:.6g} on pair {pair} exceeds {EXP_LIMIT}")


@dataclass(frozen=True)
class EnergyBreakdown:
    dirichlet: float
    exponential: float
    linear: float
    total: float


def check_potential(p: HiggsProblem, xi: np.ndarray, what: str = "xi") -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (p.r,) + p.grid.shape:
        raise ValueError(f"{what} has shape {xi.shape}, expected {(p.r,) + p.grid.shape}")
    if not np.all(np.isfinite(xi)):
        raise ValueError(f"{what} has non-finite samples")
    scale = max(1.0, float(np.max(np.abs(xi))))
    if np.max(np.abs(xi.sum(axis=0))) > 1e-12 * scale * p.r:
        raise ValueError(f"{what} is not trace-zero pointwise")
    return xi


def project_pointwise(xi: np.ndarray) -> np.ndarray:
    """Remove the pointwise mean across components (the det h = 1 constraint)."""
    return xi - xi.mean(axis=0, keepdims=True)


def trace_zero_laplacian(xi: np.ndarray) -> np.ndarray:
    """Delta of a trace-zero stack, exactly trace-zero: the last component is minus the sum of the others."""
    out = np.empty_like(xi)
    out[:-1] = laplacian(xi[:-1])
    out[-1] = -np.sum(out[:-1], axis=0)
    return out


def pairings(p: HiggsProblem, xi: np.ndarray) -> np.ndarray:
    """(K, n, n) stack of (v_{i,j}, xi) for the active pairs."""
    return np.einsum("kr,rij->kij", p.roots, xi)


def weighted_exponentials(p: HiggsProblem, xi: np.ndarray) -> np.ndarray:
    """(K, n, n) stack of c_{i,j} e^{(v_{i,j}, xi)}; raises on overflow."""
    if not p.ws.active:
        return np.zeros((0,) + p.grid.shape)
    s = pairings(p, xi)
    c = p.coeffs
    live = c > 0
    for kk, pair in enumerate(p.ws.active):
        if live[kk].any():
            top = float(np.max(s[kk][live[kk]]))
            if top > EXP_LIMIT:
                raise ExponentialOverflow(pair, top)
    return np.where(live, c * np.exp(np.minimum(s, EXP_LIMIT)), 0.0)


def m_restricted(p: HiggsProblem, xi: np.ndarray) -> EnergyBreakdown:
    xi = check_potential(p, xi)
    d = 0.25 * float(np.sum(dirichlet(xi)))
    ce = weighted_exponentials(p, xi)
    e = 0.5 * float(np.sum(integrate(ce - p.coeffs))) if len(ce) else 0.0
    lin = inner(p.a, xi)
    return EnergyBreakdown(d, e, lin, d + e + lin)


def _exp_force(p: HiggsProblem, ce: np.ndarray) -> np.ndarray:
    """sum_k ce_k v_k as an (r, n, n) stack."""
    if not len(ce):
        return np.zeros((p.r,) + p.grid.shape)
    return np.einsum("kr,kij->rij", p.roots, ce)


def gradient(p: HiggsProblem, xi: np.ndarray) -> np.ndarray:
    """L^2 gradient  1/2 Delta xi + sum 1/2 c e^{(v, xi)} v + a."""
    xi = check_potential(p, xi)
    g = 0.5 * trace_zero_laplacian(xi) + 0.5 * _exp_force(p, weighted_exponentials(p, xi)) + p.a
    return project_pointwise(g)


def residual_mu(p: HiggsProblem, xi: np.ndarray) -> np.ndarray:
    """R(xi) = Delta xi + sum c e^{(v, xi)} v - b."""
    xi = check_potential(p, xi)
    return trace_zero_laplacian(xi) + _exp_force(p, weighted_exponentials(p, xi)) - p.b


def hessian_apply(p: HiggsProblem, xi: np.ndarray, eta: np.ndarray, ce: np.ndarray | None = None) -> np.ndarray:
    """H(xi) eta = 1/2 Delta eta + sum 1/2 c e^{(v, xi)} (v, eta) v."""
    if ce is None:
        ce = weighted_exponentials(p, xi)
    out = 0.5 * trace_zero_laplacian(eta)
    if len(ce):
        out = out + 0.5 * _exp_force(p, ce * pairings(p, eta))
    return project_pointwise(out)


def second_variation(p: HiggsProblem, xi: np.ndarray, eta: np.ndarray) -> float:
    """Q(eta) = 1/2 int |grad eta|^2 + sum int 1/2 c e^{(v, xi)} (v, eta)^2 = d^2/dt^2 M(xi + t eta)."""
    xi = check_potential(p, xi)
    eta = check_potential(p, eta, "eta")
    q = 0.5 * float(np.sum(dirichlet(eta)))
    ce = weighted_exponentials(p, xi)
    if len(ce):
        q += 0.5 * float(np.sum(integrate(ce * pairings(p, eta) ** 2)))
    return q


# ---------------------------------------------------------------------------
# path integrals


class MetricPath:
    """A metric path t -> xi_t on [0, 1] with its velocity and smoothness breakpoints."""

    def __init__(self, position: Callable[[float], np.ndarray], velocity: Callable[[float], np.ndarray],
                 breakpoints: Sequence[float] = ()):
        self.position = position
        self.velocity = velocity
        self.breakpoints = tuple(sorted(b for b in breakpoints if 0.0 < b < 1.0))

    def __call__(self, t: float) -> np.ndarray:
        return self.position(t)


def polyline_path(waypoints: Sequence[np.ndarray]) -> MetricPath:
    """Piecewise-affine path through ``waypoints`` at equally spaced times."""
    pts = [np.asarray(w, dtype=float) for w in waypoints]
    if len(pts) < 2:
        raise ValueError("a path needs at least two waypoints")
    m = len(pts) - 1

    def seg(t):
        s = min(int(t * m), m - 1)
        return s, t * m - s

    def position(t):
        s, u = seg(t)
        return (1 - u) * pts[s] + u * pts[s + 1]

    def velocity(t):
        s, _ = seg(t)
        return m * (pts[s + 1] - pts[s])

    return MetricPath(position, velocity, [s / m for s in range(1, m)])


def scaled_path(xi: np.ndarray, rho: Callable[[float], float], drho: Callable[[float], float]) -> MetricPath:
    """xi_t = rho(t) xi with rho(0) = 0, rho(1) = 1."""
    xi = np.asarray(xi, dtype=float)
    return MetricPath(lambda t: rho(t) * xi, lambda t: drho(t) * xi)


def m_path_integral(p: HiggsProblem, path: MetricPath, panels: int = 64, order: int = 4) -> float:
    """int_0^1 <grad M(xi_t), d/dt xi_t> dt by composite Gauss-Legendre quadrature.

    Panels are uniform on [0, 1] and additionally split at the path's breakpoints.
    """
    if panels < 1 or order < 1:
        raise ValueError("panels and order must be positive")
    start = np.asarray(path(0.0))
    if np.max(np.abs(start)) > 1e-14:
        raise ValueError("path must start at xi = 0")
    edges = np.union1d(np.linspace(0.0, 1.0, panels + 1), path.breakpoints)
    nodes, weights = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        for x, w in zip(nodes, weights):
            t = mid + half * x
            total += w * half * inner(gradient(p, path(t)), path.velocity(t))
    return total


# ---------------------------------------------------------------------------
# geodesic scans


class Asymptotics(enum.Enum):
    DIVERGES_UP = "DIVERGES_UP"
    DIVERGES_DOWN = "DIVERGES_DOWN"
    BOUNDED_FLAT = "BOUNDED_FLAT"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ScanRow:
    t: float
    energy: EnergyBreakdown
    l2_norm: float


@dataclass(frozen=True)
class ScanResult:
    rows: tuple[ScanRow, ...]
    classification: Asymptotics
    # tail slope of M in t for constant directions; None when the Dirichlet part grows
    linear_slope: float | None
    growing_pairs: tuple
    terminated_early: bool
    # least-squares fit l2 ~ e2 M^2 + e1 M + e0 (report only)
    envelope: tuple[float, float, float] | None

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "M", "dirichlet", "exponential", "linear", "l2_norm", "classification"])
            for row in self.rows:
                e = row.energy
                w.writerow([repr(row.t), repr(e.total), repr(e.dirichlet), repr(e.exponential),
                            repr(e.linear), repr(row.l2_norm), str(self.classification)])


def classify_direction(p: HiggsProblem, xi0: np.ndarray, eta: np.ndarray, tol: float = 1e-10):
    """Closed-form behaviour of M(xi0 + t eta) as t -> +infinity.

    Returns (classification, linear slope or None, pairs with exponential growth).
    """
    eta = np.asarray(eta, dtype=float)
    scale = max(1.0, float(np.max(np.abs(eta))))
    w = integrate(eta)
    if np.max(np.abs(eta - w[:, None, None])) > 1e-12 * scale:
        # a nonconstant direction carries quadratic Dirichlet growth
        return Asymptotics.DIVERGES_UP, None, ()
    growing = []
    if p.ws.active:
        ce0 = weighted_exponentials(p, xi0)
        for kk, pair in enumerate(p.ws.active):
            s = float(p.roots[kk] @ w)
            if s > tol * scale and float(integrate(ce0[kk])) > 0:
                growing.append(pair)
    slope = 2 * np.pi * float(np.dot(p.gamma, w))
    if growing or slope > tol * scale:
        return Asymptotics.DIVERGES_UP, slope, tuple(growing)
    if slope < -tol * scale:
        return Asymptotics.DIVERGES_DOWN, slope, ()
    return Asymptotics.BOUNDED_FLAT, slope, ()


def geodesic_scan(p: HiggsProblem, xi0: np.ndarray, eta: np.ndarray, t_list: Sequence[float]) -> ScanResult:
    """Evaluate M along the affine geodesic xi_t = xi0 + t eta and classify its tail."""
    xi0 = check_potential(p, xi0, "xi0")
    eta = check_potential(p, eta, "eta")
    cls, slope, growing = classify_direction(p, xi0, eta)
    rows = []
    early = False
    for t in t_list:
        xi_t = xi0 + float(t) * eta
        try:
            e = m_restricted(p, xi_t)
        except ExponentialOverflow:
            early = True
            cls = Asymptotics.DIVERGES_UP
            break
        rows.append(ScanRow(float(t), e, l2_norm(xi_t)))
    envelope = None
    if len(rows) >= 3:
        M = np.array([r.energy.total for r in rows])
        L = np.array([r.l2_norm for r in rows])
        if np.ptp(M) > 1e-12 * (1 + np.max(np.abs(M))):
            envelope = tuple(float(v) for v in np.polyfit(M, L, 2))
    return ScanResult(tuple(rows), cls, slope, growing, early, envelope)
