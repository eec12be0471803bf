"""Equation data for the diagonal Hermitian-Einstein system.

Geometric inputs are the Higgs entries phi_{i,j} (coefficient of dz, the block
mapping L_j into L_i, in a trivialized gauge), background diagonal metric
factors k_j > 0 and background curvature scalars a_j = i Lambda F_{K_j} with
sum_j a_j = 0. They map to the equation data

    c_{i,j} = 4 |phi_{i,j}|^2 k_i / k_j,   b = -2 a,   gamma_j = (1/2pi) int a_j.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from . import fieldexpr
from .cone import rationalize_gamma
from .grid import PeriodicGrid, integrate
from .weights import Pair, TraceZeroVector, WeightSystem

TRACE_RTOL = 1e-12
# samples of c below this fraction of max(c) count as zeros (round-off images of analytic zeros)
ZERO_RTOL = 1e-24

Source = Union[str, float, int, np.ndarray]


class ProblemError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HiggsProblem:
    ws: WeightSystem
    grid: PeriodicGrid
    phi_re: dict[Pair, np.ndarray]
    phi_im: dict[Pair, np.ndarray]
    k: np.ndarray
    a: np.ndarray
    c: dict[Pair, np.ndarray]
    b: np.ndarray
    gamma: np.ndarray
    gamma_exact: TraceZeroVector
    gamma_rounding: float
    phi0: dict[int, np.ndarray] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    @property
    def r(self) -> int:
        return self.ws.r

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def roots(self) -> np.ndarray:
        """(K, r) float matrix of active root vectors."""
        return self.ws.roots().astype(float)

    @property
    def coeffs(self) -> np.ndarray:
        """(K, n, n) stack of c_{i,j} in active-pair order."""
        if not self.ws.active:
            return np.zeros((0,) + self.grid.shape)
        return np.stack([self.c[p] for p in self.ws.active])

    def phi(self, pair: Pair) -> np.ndarray:
        return self.phi_re[pair] + 1j * self.phi_im[pair]


def _as_field(src, grid: PeriodicGrid, what: str) -> np.ndarray:
    if isinstance(src, (str, bytes)):
        try:
            return fieldexpr.evaluate(src, grid)
        except (fieldexpr.ExprSyntaxError, fieldexpr.ExprDomainError) as exc:
            raise ProblemError(f"{what}: {exc}") from exc
    arr = np.asarray(src, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.shape, float(arr))
    if arr.shape != grid.shape:
        raise ProblemError(f"{what}: shape {arr.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(arr)):
        raise ProblemError(f"{what}: non-finite samples")
    return arr.copy()


def _as_complex_field(src, grid: PeriodicGrid, what: str) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(src, tuple):
        re, im = src
        return _as_field(re, grid, what + ".re"), _as_field(im, grid, what + ".im")
    if isinstance(src, np.ndarray) and np.iscomplexobj(src):
        return _as_field(src.real, grid, what), _as_field(src.imag, grid, what)
    return _as_field(src, grid, what), np.zeros(grid.shape)


def _stack(srcs, r: int, grid: PeriodicGrid, what: str, default: float) -> np.ndarray:
    if srcs is None:
        return np.full((r,) + grid.shape, default)
    if isinstance(srcs, np.ndarray) and srcs.ndim == 3:
        srcs = list(srcs)
    if len(srcs) != r:
        raise ProblemError(f"{what}: expected {r} entries, got {len(srcs)}")
    return np.stack([_as_field(s, grid, f"{what}{j + 1}") for j, s in enumerate(srcs)])


def _is_zero(c: np.ndarray) -> np.ndarray:
    top = float(np.max(c)) if c.size else 0.0
    return c <= ZERO_RTOL * top


def assemble(
    ws: WeightSystem,
    grid: PeriodicGrid,
    phi: Mapping[Pair, object],
    k: Sequence | np.ndarray | None = None,
    a: Sequence | np.ndarray | None = None,
    phi0: Mapping[int, object] | None = None,
) -> HiggsProblem:
    """Build the equation data for the declared active set ``ws.active``.

    ``phi`` maps active pairs to a real source, a complex array or an ``(re, im)``
    tuple; sources are expression strings, numbers or ``(n, n)`` arrays. Active
    pairs missing from ``phi`` are treated as identically zero (which
    ``validate_log_integrability`` reports as FAIL).
    """
    r = ws.r
    for pair in phi:
        if tuple(pair) not in ws.active:
            raise ProblemError(f"phi entry {pair} is not an active pair of the weight system")
    kf = _stack(k, r, grid, "k", 1.0)
    af = _stack(a, r, grid, "a", 0.0)
    if np.any(kf <= 0):
        j = int(np.argwhere(kf <= 0)[0][0]) + 1
        raise ProblemError(f"k{j} is not strictly positive")
    trace = af.sum(axis=0)
    scale = max(1.0, float(np.max(np.abs(af))))
    if np.max(np.abs(trace)) > TRACE_RTOL * scale:
        raise ProblemError(f"sum_j a_j is not zero pointwise (max {np.max(np.abs(trace)):.3e})")
    af = af - trace / r

    phi_re, phi_im, c = {}, {}, {}
    warnings = []
    for pair in ws.active:
        i, j = pair
        re, im = _as_complex_field(phi.get(pair, 0.0), grid, f"phi[{i},{j}]")
        phi_re[pair], phi_im[pair] = re, im
        cij = 4.0 * (re * re + im * im) * kf[i - 1] / kf[j - 1]
        c[pair] = cij
        zeros = _is_zero(cij)
        if zeros.all():
            warnings.append(f"phi[{i},{j}] vanishes identically on an active pair")
        elif zeros.any():
            warnings.append(
                f"phi[{i},{j}] has {int(zeros.sum())} zero samples; log-integrability is assumed"
            )

    p0 = {}
    for alpha, src in (phi0 or {}).items():
        if not 1 <= int(alpha) <= r:
            raise ProblemError(f"phi0 index {alpha} out of range")
        re, im = _as_complex_field(src, grid, f"phi0[{alpha}]")
        p0[int(alpha)] = re + 1j * im

    gamma = np.asarray(integrate(af)) / (2 * np.pi)
    gamma_exact, radius = rationalize_gamma(gamma)
    return HiggsProblem(
        ws=ws, grid=grid, phi_re=phi_re, phi_im=phi_im, k=kf, a=af, c=c, b=-2.0 * af,
        gamma=gamma, gamma_exact=gamma_exact, gamma_rounding=radius, phi0=p0,
        warnings=tuple(warnings),
    )


def from_entries(
    r: int,
    grid: PeriodicGrid,
    phi: Mapping[Pair, object],
    k=None,
    a=None,
    phi0=None,
) -> HiggsProblem:
    """Assemble with the active set read off ``phi``: entries that vanish identically are dropped."""
    kept = {}
    for pair, src in phi.items():
        re, im = _as_complex_field(src, grid, f"phi[{pair[0]},{pair[1]}]")
        if np.any(re != 0) or np.any(im != 0):
            kept[tuple(pair)] = (re, im)
    ws = WeightSystem(r, tuple(kept))
    return assemble(ws, grid, kept, k, a, phi0)


def cyclic_pairs(r: int) -> tuple[Pair, ...]:
    """(2,1), (3,2), ..., (r,r-1), (1,r): subdiagonal entries then the corner."""
    if r < 2:
        raise ProblemError("cyclic Higgs fields need r >= 2")
    return tuple((i + 1, i) for i in range(1, r)) + ((1, r),)


def make_cyclic(r: int, grid: PeriodicGrid, phi_exprs, k_exprs=None, a_exprs=None) -> HiggsProblem:
    """Cyclic Higgs field: Phi_i at (i+1, i) for i < r and Phi_r in the corner (1, r)."""
    pairs = cyclic_pairs(r)
    if len(phi_exprs) != r:
        raise ProblemError(f"cyclic field needs {r} entries, got {len(phi_exprs)}")
    return from_entries(r, grid, dict(zip(pairs, phi_exprs)), k_exprs, a_exprs)


class IntegrabilityStatus(enum.Enum):
    OK = "OK"
    WARN = "WARN"
    FAIL = "FAIL"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class PairIntegrability:
    pair: Pair
    status: IntegrabilityStatus
    mean_log: float
    zero_fraction: float


@dataclass(frozen=True)
class IntegrabilityReport:
    entries: tuple[PairIntegrability, ...]

    @property
    def status(self) -> IntegrabilityStatus:
        order = [IntegrabilityStatus.OK, IntegrabilityStatus.WARN, IntegrabilityStatus.FAIL]
        return max((e.status for e in self.entries), key=order.index, default=IntegrabilityStatus.OK)

    def report(self) -> str:
        lines = [f"log_integrability: {self.status}"]
        for e in self.entries:
            lines.append(
                f"pair[{e.pair[0]},{e.pair[1]}]: {e.status} mean_log={e.mean_log:.12g} "
                f"zero_fraction={e.zero_fraction:.6g}"
            )
        return "\n".join(lines)


def validate_log_integrability(p: HiggsProblem) -> IntegrabilityReport:
    """Discrete proxy for integrability of log c on each active pair.

    WARN when some samples vanish, FAIL when c vanishes identically. The mean of
    log c is taken over the nonzero samples.
    """
    entries = []
    for pair in p.ws.active:
        cij = p.c[pair]
        zeros = _is_zero(cij)
        frac = float(zeros.mean())
        if zeros.all():
            entries.append(PairIntegrability(pair, IntegrabilityStatus.FAIL, float("-inf"), 1.0))
            continue
        mean_log = float(np.mean(np.log(cij[~zeros])))
        status = IntegrabilityStatus.WARN if zeros.any() else IntegrabilityStatus.OK
        entries.append(PairIntegrability(pair, status, mean_log, frac))
    return IntegrabilityReport(tuple(entries))
