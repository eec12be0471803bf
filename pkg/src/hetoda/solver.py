"""Newton-Krylov minimization of the restricted functional.

Each outer step solves H(xi) delta = -grad M(xi) by conjugate gradients
preconditioned with the spectral operator (Delta + mu)^{-1}, restricted to the
L^2-orthogonal complement of the flat subspace

    W_flat = {constant w in V : (v_{i,j}, w) = 0 for every active pair},

followed by an Armijo backtracking line search on M. Iterates carry no flat
component (minimum-norm representative). When gamma has a component along
W_flat the functional decreases linearly along that constant direction; the
solver then walks it until the divergence radius is crossed. More generally,
whenever the cone condition fails the functional does not increase along the
(non-flat part of the) certificate direction, and the solver walks that ray
with doubling steps as long as M does not increase.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cone import ConeCertificate, check_condition_v
from .functional import (
    ExponentialOverflow,
    gradient,
    hessian_apply,
    m_restricted,
    project_pointwise,
    residual_mu,
    weighted_exponentials,
)
from .grid import inner, integrate, l2_norm, shifted_inverse
from .problem import HiggsProblem
from .weights import root_vector, trace_zero_kernel

ARMIJO = 1e-4
MAX_BACKTRACKS = 60
CG_GROWTH = 1e4


class SolveStatus(enum.Enum):
    CONVERGED = "Converged"
    DIVERGENCE_DETECTED = "DivergenceDetected"
    MAX_ITERATIONS = "MaxIterations"

    def __str__(self) -> str:
        return self.value


class SolverError(RuntimeError):
    """Unrecoverable failure: non-finite curvature or overflow that backtracking cannot cure."""


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-10
    max_iter: int = 200
    divergence_radius: float = 1e3
    cg_max_iter: int = 400
    cg_rtol: float = 1e-2


@dataclass(frozen=True)
class FlatSubspace:
    exact_basis: tuple[tuple[Fraction, ...], ...]
    # rows form an orthonormal basis (Euclidean in R^r) of the same subspace
    orthonormal: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.exact_basis)

    def project_constants(self, field_stack: np.ndarray) -> np.ndarray:
        """Remove the W_flat component (L^2-orthogonal projection)."""
        if not self.dim:
            return field_stack
        mean = integrate(field_stack)
        coef = self.orthonormal @ mean
        return field_stack - (self.orthonormal.T @ coef)[:, None, None]

    def component(self, vec: np.ndarray) -> np.ndarray:
        if not self.dim:
            return np.zeros_like(vec)
        return self.orthonormal.T @ (self.orthonormal @ vec)


@dataclass(frozen=True)
class HistoryEntry:
    iteration: int
    energy: float
    grad_norm: float
    xi_norm: float


@dataclass(frozen=True)
class SolveReport:
    status: SolveStatus
    iterations: int
    residual_linf: float
    residual_l2: float
    energy_history: tuple[HistoryEntry, ...]
    flat_subspace_dim: int
    certificate_cross_check: ConeCertificate
    structural_unbounded: bool = False
    cg_iterations: int = 0
    messages: tuple[str, ...] = field(default=())

    def to_text(self) -> str:
        lines = [
            f"status: {self.status}",
            f"iterations: {self.iterations}",
            f"residual_linf: {self.residual_linf:.6e}",
            f"residual_l2: {self.residual_l2:.6e}",
            f"flat_subspace_dim: {self.flat_subspace_dim}",
            f"structural_unbounded: {self.structural_unbounded}",
            f"cg_iterations: {self.cg_iterations}",
        ]
        lines += ["certificate." + line for line in self.certificate_cross_check.report().splitlines()]
        lines += [f"message: {m}" for m in self.messages]
        lines.append("history: iteration energy grad_l2 xi_l2")
        for h in self.energy_history:
            lines.append(f"  {h.iteration} {h.energy:.15e} {h.grad_norm:.6e} {h.xi_norm:.6e}")
        return "\n".join(lines) + "\n"


def flat_subspace(p: HiggsProblem) -> FlatSubspace:
    """Exact kernel of w -> ((v_{i,j}, w))_{active} on V, plus a float orthonormal basis."""
    roots = [root_vector(p.ws, i, j) for i, j in p.ws.active]
    basis = trace_zero_kernel(roots, p.r)
    if basis:
        q, _ = np.linalg.qr(np.array([[float(v) for v in b] for b in basis]).T)
        ortho = q.T.copy()
    else:
        ortho = np.zeros((0, p.r))
    return FlatSubspace(tuple(basis), ortho)


def _pcg(apply_H, rhs, precond, project, rtol, max_iter):
    """Preconditioned CG for H x = rhs on the projected subspace; returns (x, iterations).

    Round-off breakdown (nonpositive curvature or preconditioned residual norm,
    or a residual grown CG_GROWTH-fold past its best) truncates the iteration
    and returns the iterate with the smallest residual.
    """
    x = np.zeros_like(rhs)
    res = rhs.copy()
    rhs_norm = np.sqrt(inner(rhs, rhs))
    if rhs_norm == 0:
        return x, 0
    z = precond(res)
    d = z.copy()
    rz = inner(res, z)
    best, best_norm = None, rhs_norm
    for it in range(1, max_iter + 1):
        Hd = apply_H(d)
        dHd = inner(d, Hd)
        if not np.isfinite(dHd):
            raise SolverError(f"CG breakdown: curvature {dHd} at iteration {it}")
        if dHd <= 0 or rz <= 0:
            # M is convex, so this is numerical flatness (e.g. underflowed exponentials)
            break
        alpha = rz / dHd
        x = x + alpha * d
        res = res - alpha * Hd
        res_norm = np.sqrt(inner(res, res))
        if res_norm < best_norm:
            best, best_norm = x, res_norm
        if res_norm <= rtol * rhs_norm:
            return project(x), it
        if not res_norm < CG_GROWTH * best_norm:
            # recurrences have lost orthogonality and the residual is blowing up
            break
        z = precond(res)
        rz_new = inner(res, z)
        d = project(z + (rz_new / rz) * d)
        rz = rz_new
    # no progress at all: fall back to the preconditioned residual direction
    return project(best if best is not None else precond(rhs)), it


def solve(p: HiggsProblem, opts: SolveOptions | None = None, xi0: np.ndarray | None = None):
    """Minimize the restricted functional; returns (xi, SolveReport).

    Parameters
    ----------
    p : HiggsProblem
    opts : SolveOptions, optional
        Tolerance on ||R||_inf, iteration cap, divergence radius (L^2 norm of xi).
    xi0 : ndarray, optional
        Warm start of shape (r, n, n); defaults to 0, the background metric.
    """
    opts = opts or SolveOptions()
    shape = (p.r,) + p.grid.shape
    cert = check_condition_v(p.ws, p.gamma_exact)
    flat = flat_subspace(p)

    def project(s):
        return flat.project_constants(project_pointwise(s))

    xi = np.zeros(shape) if xi0 is None else project(np.asarray(xi0, dtype=float).reshape(shape))
    flat_gamma = flat.component(2 * np.pi * p.gamma)
    structural = bool(np.linalg.norm(flat_gamma) > 1e-9 * (1 + np.linalg.norm(p.gamma)))
    messages = []
    ray = None
    if structural:
        messages.append("gamma has a component along W_flat: M is linear and unbounded below there")
        ray = -flat_gamma / np.linalg.norm(flat_gamma)
    elif cert.farkas_w is not None:
        w = np.array([float(v) for v in cert.farkas_w])
        w = w - flat.component(w)
        ray = w / np.linalg.norm(w)
        messages.append("condition (v) fails: M is nonincreasing along the certificate ray")
    if not p.ws.active:
        mu = 1e-8
    else:
        mu = max(float(np.mean(p.coeffs)), 1e-8)

    def precond(s):
        return project(shifted_inverse(s, mu))

    history = []
    status = SolveStatus.MAX_ITERATIONS
    energy = m_restricted(p, xi).total
    cg_total = 0
    ray_step = 1.0
    it = 0
    while True:
        g = project(gradient(p, xi))
        R = 2.0 * g
        res_inf = float(np.max(np.abs(R)))
        xi_norm = l2_norm(xi)
        history.append(HistoryEntry(it, energy, l2_norm(g), xi_norm))
        if xi_norm > opts.divergence_radius and energy <= history[0].energy:
            status = SolveStatus.DIVERGENCE_DETECTED
            messages.append(f"||xi||_L2 = {xi_norm:.3e} exceeded radius {opts.divergence_radius:g} "
                            f"with M = {energy:.6e} <= M(xi_0) = {history[0].energy:.6e}")
            break
        if res_inf <= opts.tol and ray is None:
            status = SolveStatus.CONVERGED
            break
        if it >= opts.max_iter:
            break
        it += 1

        if res_inf > opts.tol:
            ce = weighted_exponentials(p, xi)
            gnorm = np.sqrt(inner(g, g))
            rtol = min(opts.cg_rtol, max(gnorm, 1e-14))
            delta, cg_its = _pcg(lambda d: project(hessian_apply(p, xi, d, ce)), -g, precond, project,
                                 rtol, opts.cg_max_iter)
            cg_total += cg_its
            slope = inner(g, delta)
            if slope >= 0:
                # inexact solve lost descent; fall back to the preconditioned gradient
                delta = -precond(g)
                slope = inner(g, delta)
            xi, energy = _line_search(p, xi, energy, delta, slope)
        if ray is not None:
            # accelerate the escape along the certificate ray; doubling while M does not increase
            trial = xi + ray_step * ray[:, None, None]
            try:
                e = m_restricted(p, trial).total
            except ExponentialOverflow:
                e = np.inf
            if e <= energy:
                xi, energy = trial, e
                ray_step *= 2.0
            else:
                ray_step = 1.0

    Rfin = residual_mu(p, xi)
    report = SolveReport(
        status=status,
        iterations=it,
        residual_linf=float(np.max(np.abs(Rfin))),
        residual_l2=l2_norm(Rfin),
        energy_history=tuple(history),
        flat_subspace_dim=flat.dim,
        certificate_cross_check=cert,
        structural_unbounded=structural,
        cg_iterations=cg_total,
        messages=tuple(messages),
    )
    return xi, report


def _line_search(p, xi, energy, delta, slope):
    """Armijo backtracking on M; a step whose predicted decrease is below the
    round-off level of M is taken in full."""
    if -slope <= 1e-13 * (1.0 + abs(energy)):
        trial = xi + delta
        return trial, m_restricted(p, trial).total
    step = 1.0
    last_error = None
    for _ in range(MAX_BACKTRACKS):
        trial = xi + step * delta
        try:
            e = m_restricted(p, trial).total
        except ExponentialOverflow as exc:
            last_error = exc
            step *= 0.5
            continue
        if e <= energy + ARMIJO * step * slope:
            return trial, e
        step *= 0.5
    if last_error is not None:
        raise SolverError(f"overflow not cured by backtracking: {last_error}")
    raise SolverError("line search failed to find a decrease")
