"""Exact decision of strict cone membership  -gamma in sum_{active} R_{>0} v_{i,j}.

Feasibility is decided by the auxiliary program

    maximize t  subject to  lambda_k >= t,  sum_k lambda_k v_k = -gamma,  t <= 1

solved by a two-phase dense-tableau simplex over ``Fraction`` with Bland's rule.
Writing lambda_k = mu_k + t and t = 1 - s with mu, s >= 0 turns it into

    minimize s  subject to  sum_k mu_k v_k - s * sigma = -gamma - sigma,

with sigma = sum_k v_k. Dual multipliers of the final tableau give the
certificate direction when the optimum has t <= 0.

Infeasible certificates w in V satisfy (v_k, w) <= 0 for every active k and
(-gamma, w) >= 0, with strict inequality in at least one place. When
(-gamma, w) > 0 this is the classical Farkas certificate (``strict_farkas``);
otherwise -gamma lies on the relative boundary of the closed cone and some
(v_k, w) < 0 witnesses that no all-positive combination exists.
"""

from __future__ import annotations

import dataclasses
import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .weights import (
    Pair,
    TraceZeroVector,
    WeightSystem,
    dot,
    is_exact,
    kernel,
    primitive_integer,
    rank,
    root_vector,
    rref,
    trace_zero_kernel,
)

DEFAULT_DENOMINATOR = 10**9


class ConeStatus(enum.Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"

    def __str__(self) -> str:
        return self.value


class CertificateError(AssertionError):
    """A certificate failed exact post-hoc verification."""


@dataclass(frozen=True)
class ConeCertificate:
    status: ConeStatus
    gamma: TraceZeroVector
    active: tuple[Pair, ...]
    lambdas: dict[Pair, Fraction] | None = None
    farkas_w: tuple[int, ...] | None = None
    # optimal t of the auxiliary program (None when -gamma is outside the span)
    margin: Fraction | None = None
    span_rank: int = 0
    rounding_radius: float | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def feasible(self) -> bool:
        return self.status is ConeStatus.FEASIBLE

    @property
    def spans_v(self) -> bool:
        return self.span_rank == len(self.gamma) - 1

    @property
    def strict_farkas(self) -> bool:
        if self.farkas_w is None:
            return False
        return dot([-g for g in self.gamma], self.farkas_w) > 0

    def report(self) -> str:
        lines = [
            f"status: {self.status}",
            "gamma: (" + ", ".join(str(g) for g in self.gamma) + ")",
            "active: " + (" ".join(f"({i},{j})" for i, j in self.active) or "none"),
            f"span_rank: {self.span_rank} of {len(self.gamma) - 1}",
        ]
        if self.margin is not None:
            lines.append(f"margin_t: {self.margin}")
        if self.lambdas is not None:
            for (i, j), lam in self.lambdas.items():
                lines.append(f"lambda[{i},{j}]: {lam}")
        if self.farkas_w is not None:
            lines.append("farkas_w: (" + ", ".join(str(v) for v in self.farkas_w) + ")")
            lines.append(f"strict_farkas: {self.strict_farkas}")
        if self.rounding_radius is not None:
            lines.append(f"rounding_radius: {self.rounding_radius:.3e}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


def _check_inputs(ws: WeightSystem, gamma: Sequence) -> TraceZeroVector:
    if len(gamma) != ws.r:
        raise ValueError(f"gamma has {len(gamma)} entries, rank is {ws.r}")
    if not is_exact(gamma):
        raise TypeError("gamma must be rational in exact mode; use rationalize_gamma first")
    return TraceZeroVector(gamma)


def verify_certificate(ws: WeightSystem, cert: ConeCertificate) -> None:
    """Exact post-hoc check; raises CertificateError on any violation."""
    gamma = cert.gamma
    neg_gamma = [-g for g in gamma]
    roots = [root_vector(ws, i, j) for i, j in ws.active]
    if cert.status is ConeStatus.FEASIBLE:
        if cert.lambdas is None or set(cert.lambdas) != set(ws.active):
            raise CertificateError("feasible certificate must carry one lambda per active pair")
        if any(lam <= 0 for lam in cert.lambdas.values()):
            raise CertificateError("nonpositive lambda")
        total = [Fraction(0)] * ws.r
        for pair, v in zip(ws.active, roots):
            lam = cert.lambdas[pair]
            total = [t + lam * x for t, x in zip(total, v)]
        if total != neg_gamma:
            raise CertificateError(f"sum lambda v = {total} != -gamma = {neg_gamma}")
        return
    w = cert.farkas_w
    if w is None or len(w) != ws.r or sum(w) != 0:
        raise CertificateError("infeasible certificate needs a trace-zero direction w")
    pairings = [dot(v, w) for v in roots]
    if any(p > 0 for p in pairings):
        raise CertificateError("(v, w) > 0 for some active pair")
    g = dot(neg_gamma, w)
    if g < 0:
        raise CertificateError("(-gamma, w) < 0")
    if g == 0 and not any(p < 0 for p in pairings):
        raise CertificateError("certificate is not strict anywhere")


# ---------------------------------------------------------------------------
# simplex kernel


class _Unbounded(Exception):
    pass


class _Tableau:
    """Dense tableau  B^{-1} [A | I | d]  with the artificial identity kept in place."""

    def __init__(self, A: list[list[Fraction]], d: list[Fraction]):
        self.m = len(A)
        self.n = len(A[0]) if A else 0
        self.signs = [1 if di >= 0 else -1 for di in d]
        self.rows = []
        for i, (row, di) in enumerate(zip(A, d)):
            s = self.signs[i]
            art = [Fraction(int(k == i)) for k in range(self.m)]
            self.rows.append([s * v for v in row] + art + [s * di])
        self.basis = [self.n + i for i in range(self.m)]

    def value(self, j: int) -> Fraction:
        for i, b in enumerate(self.basis):
            if b == j:
                return self.rows[i][-1]
        return Fraction(0)

    def _reduced_costs(self, cost: list[Fraction], allowed: range) -> dict[int, Fraction]:
        cb = [cost[b] for b in self.basis]
        return {j: cost[j] - sum(c * row[j] for c, row in zip(cb, self.rows)) for j in allowed}

    def pivot(self, r: int, j: int) -> None:
        prow = self.rows[r]
        p = prow[j]
        prow = [v / p for v in prow]
        self.rows[r] = prow
        for i, row in enumerate(self.rows):
            if i != r and row[j] != 0:
                f = row[j]
                self.rows[i] = [a - f * b for a, b in zip(row, prow)]
        self.basis[r] = j

    def minimize(self, cost: list[Fraction], allowed: range) -> None:
        """Bland's rule: lowest-index improving column, lowest-index leaving variable."""
        while True:
            rc = self._reduced_costs(cost, allowed)
            entering = next((j for j in allowed if rc[j] < 0), None)
            if entering is None:
                return
            best = None
            for i, row in enumerate(self.rows):
                if row[entering] > 0:
                    ratio = row[-1] / row[entering]
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                raise _Unbounded
            self.pivot(best[1], entering)

    def objective(self, cost: list[Fraction]) -> Fraction:
        return sum(cost[b] * row[-1] for b, row in zip(self.basis, self.rows))

    def duals(self, cost: list[Fraction]) -> list[Fraction]:
        """y = c_B^T B^{-1}, mapped back through the row sign normalization."""
        cb = [cost[b] for b in self.basis]
        y = [sum(c * row[self.n + i] for c, row in zip(cb, self.rows)) for i in range(self.m)]
        return [s * v for s, v in zip(self.signs, y)]

    def drive_out_artificials(self) -> None:
        for i, b in enumerate(self.basis):
            if b >= self.n:
                col = next((j for j in range(self.n) if self.rows[i][j] != 0), None)
                if col is not None:
                    self.pivot(i, col)


def _direction_from_reduced(y: Sequence[Fraction], r: int) -> tuple[Fraction, ...]:
    """w in V with (x, w) = sum_{i<r} x_i y_i for every x in V."""
    w_r = -sum(y, Fraction(0)) / r
    return tuple([yi + w_r for yi in y] + [w_r])


def check_condition_v(ws: WeightSystem, gamma: Sequence) -> ConeCertificate:
    """Decide -gamma in sum R_{>0} v_{i,j} over ``ws.active``, exactly.

    Parameters
    ----------
    ws : WeightSystem
        Rank and active pairs.
    gamma : sequence of int or Fraction
        Trace-zero degree vector.

    Returns
    -------
    ConeCertificate
        Verified certificate: positive ``lambdas`` with sum lambda v = -gamma, or
        a primitive integer direction ``farkas_w``.
    """
    gamma = _check_inputs(ws, gamma)
    r = ws.r
    neg_gamma = [-g for g in gamma]
    roots = [root_vector(ws, i, j) for i, j in ws.active]
    span_rank = rank(roots)
    notes = []
    if roots and span_rank < r - 1:
        notes.append(f"active roots span a {span_rank}-dimensional subspace of V (dim {r - 1})")

    if not roots:
        if all(g == 0 for g in gamma):
            cert = ConeCertificate(ConeStatus.FEASIBLE, gamma, ws.active, lambdas={}, notes=tuple(notes))
        else:
            cert = ConeCertificate(
                ConeStatus.INFEASIBLE, gamma, ws.active,
                farkas_w=primitive_integer(neg_gamma), notes=("empty active set",),
            )
        verify_certificate(ws, cert)
        return cert

    K = len(roots)
    sigma = [sum(v[c] for v in roots) for c in range(r)]
    # drop the last coordinate: every vector involved lies in V
    A = [[Fraction(v[c]) for v in roots] + [Fraction(-sigma[c])] for c in range(r - 1)]
    d = [Fraction(neg_gamma[c] - sigma[c]) for c in range(r - 1)]
    tab = _Tableau(A, d)
    nvar = K + 1
    phase1 = [Fraction(0)] * nvar + [Fraction(1)] * tab.m
    tab.minimize(phase1, range(nvar + tab.m))

    if tab.objective(phase1) > 0:
        w = _direction_from_reduced(tab.duals(phase1), r)
        notes.append("-gamma is outside the span of the active roots")
        cert = ConeCertificate(
            ConeStatus.INFEASIBLE, gamma, ws.active,
            farkas_w=primitive_integer(w), span_rank=span_rank, notes=tuple(notes),
        )
        verify_certificate(ws, cert)
        return cert

    tab.drive_out_artificials()
    phase2 = [Fraction(0)] * K + [Fraction(1)] + [Fraction(0)] * tab.m
    tab.minimize(phase2, range(nvar))
    s_opt = tab.objective(phase2)
    t_opt = 1 - s_opt
    if t_opt > 0:
        lambdas = {pair: tab.value(k) + t_opt for k, pair in enumerate(ws.active)}
        cert = ConeCertificate(
            ConeStatus.FEASIBLE, gamma, ws.active, lambdas=lambdas,
            margin=t_opt, span_rank=span_rank, notes=tuple(notes),
        )
    else:
        w = _direction_from_reduced(tab.duals(phase2), r)
        cert = ConeCertificate(
            ConeStatus.INFEASIBLE, gamma, ws.active, farkas_w=primitive_integer(w),
            margin=t_opt, span_rank=span_rank, notes=tuple(notes),
        )
    verify_certificate(ws, cert)
    return cert


def rationalize_gamma(gamma: Sequence[float], denominator: int = DEFAULT_DENOMINATOR):
    """Round a float degree vector to ``denominator`` and re-project to trace zero.

    Returns the exact vector and the max-norm rounding radius.
    """
    gamma = [float(g) for g in gamma]
    if not np.all(np.isfinite(gamma)):
        raise ValueError("non-finite gamma")
    q = [Fraction(round(g * denominator), denominator) for g in gamma]
    mean = sum(q, Fraction(0)) / len(q)
    q = TraceZeroVector(v - mean for v in q)
    radius = max(abs(float(a) - b) for a, b in zip(q, gamma))
    return q, radius


def check_condition_v_numeric(
    ws: WeightSystem, gamma: Sequence[float], denominator: int = DEFAULT_DENOMINATOR
) -> ConeCertificate:
    """Rationalize a quadrature-derived gamma, then decide exactly."""
    if is_exact(gamma):
        return check_condition_v(ws, gamma)
    q, radius = rationalize_gamma(gamma, denominator)
    cert = check_condition_v(ws, q)
    return dataclasses.replace(cert, rounding_radius=radius)


# ---------------------------------------------------------------------------
# enumeration oracle (tests only)

ORACLE_MAX_ACTIVE = 12
ORACLE_MAX_RANK = 6


def _solve_square(M: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction] | None:
    m, pivots = rref([row + [b] for row, b in zip(M, rhs)])
    n = len(M)
    if pivots != list(range(n)):
        return None
    return [m[i][n] for i in range(n)]


def oracle_condition_v(ws: WeightSystem, gamma: Sequence) -> ConeCertificate:
    """Decide condition (v) by brute force, independently of the simplex.

    Feasibility: enumerate every basic solution of the auxiliary program and take
    the best t. Certificates: enumerate lineality directions and extreme-ray
    candidates of the polar cone {w in V : (v_k, w) <= 0}.
    """
    gamma = _check_inputs(ws, gamma)
    r = ws.r
    if len(ws.active) > ORACLE_MAX_ACTIVE or r > ORACLE_MAX_RANK:
        raise ValueError("instance exceeds the enumeration bound")
    neg_gamma = [-g for g in gamma]
    roots = [tuple(root_vector(ws, i, j)) for i, j in ws.active]
    K = len(roots)
    span_rank = rank(roots) if roots else 0

    best_t, best_x = None, None
    if K:
        sigma = [sum(v[c] for v in roots) for c in range(r)]
        cols = [list(v) for v in roots] + [[-s for s in sigma]]
        d = [neg_gamma[c] - sigma[c] for c in range(r)]
        rows_full = [[Fraction(col[c]) for col in cols] for c in range(r)]
        rho = rank(rows_full)
        if rank([row + [d[c]] for c, row in enumerate(rows_full)]) == rho:
            # keep an independent set of rows
            keep, acc = [], []
            for c in range(r):
                if rank(acc + [rows_full[c]]) > len(acc):
                    acc.append(rows_full[c])
                    keep.append(c)
            for basis in itertools.combinations(range(K + 1), rho):
                M = [[rows_full[c][j] for j in basis] for c in keep]
                xb = _solve_square(M, [Fraction(d[c]) for c in keep])
                if xb is None or any(v < 0 for v in xb):
                    continue
                x = [Fraction(0)] * (K + 1)
                for j, v in zip(basis, xb):
                    x[j] = v
                t = 1 - x[K]
                if best_t is None or t > best_t:
                    best_t, best_x = t, x
    elif all(g == 0 for g in gamma):
        best_t, best_x = Fraction(1), [Fraction(0)]

    if best_t is not None and best_t > 0:
        lambdas = {pair: best_x[k] + best_t for k, pair in enumerate(ws.active)}
        cert = ConeCertificate(ConeStatus.FEASIBLE, gamma, ws.active, lambdas=lambdas,
                               margin=best_t, span_rank=span_rank)
        verify_certificate(ws, cert)
        return cert

    lineality = trace_zero_kernel(roots, r)
    candidates = list(lineality)
    if span_rank >= 1:
        for subset in itertools.combinations(roots, span_rank - 1):
            if subset and rank(list(subset)) < span_rank - 1:
                continue
            # directions tight on the subset, orthogonal to the lineality space
            for g in kernel([*subset, [1] * r, *lineality], r):
                candidates.append(g)
    for g in candidates:
        for sign in (1, -1):
            w = [sign * v for v in g]
            pairings = [dot(v, w) for v in roots]
            val = dot(neg_gamma, w)
            if all(p <= 0 for p in pairings) and val >= 0 and (val > 0 or any(p < 0 for p in pairings)):
                cert = ConeCertificate(ConeStatus.INFEASIBLE, gamma, ws.active,
                                       farkas_w=primitive_integer(w), margin=best_t,
                                       span_rank=span_rank)
                verify_certificate(ws, cert)
                return cert
    raise CertificateError("oracle found neither a feasible point nor a certificate")
