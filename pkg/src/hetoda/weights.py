"""Trace-zero weight space V, root vectors v_{i,j} = u_i - u_j and degree vectors.

All user-facing indices are 1-based. Vectors are plain tuples; entries are
``int``/``Fraction`` in exact mode and ``float`` otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np

Pair = tuple[int, int]

FLOAT_TRACE_RTOL = 1e-12


def is_exact(x: Iterable) -> bool:
    return all(isinstance(v, Rational) for v in x)


class TraceZeroVector(tuple):
    """An r-vector whose entries sum to zero.

    Exact (``int``/``Fraction``) entries must sum to exactly zero; float entries
    within ``1e-12 * max|x|``.
    """

    def __new__(cls, entries: Iterable):
        entries = tuple(entries)
        if len(entries) < 1:
            raise ValueError("empty vector")
        if is_exact(entries):
            entries = tuple(Fraction(v) for v in entries)
            if sum(entries) != 0:
                raise ValueError(f"entries sum to {sum(entries)}, not 0")
        else:
            entries = tuple(float(v) for v in entries)
            scale = max(abs(v) for v in entries)
            if not np.all(np.isfinite(entries)):
                raise ValueError("non-finite entry")
            total = math.fsum(entries)
            if abs(total) > FLOAT_TRACE_RTOL * scale:
                raise ValueError(f"entries sum to {total!r}, not 0")
        return super().__new__(cls, entries)

    @property
    def exact(self) -> bool:
        return is_exact(self)

    def as_array(self) -> np.ndarray:
        return np.array([float(v) for v in self])

    def __repr__(self) -> str:
        return "TraceZeroVector(" + ", ".join(str(v) for v in self) + ")"


@dataclass(frozen=True)
class WeightSystem:
    """Rank ``r`` and the ordered set of active pairs ``(i, j)``, 1-based."""

    r: int
    active: tuple[Pair, ...] = ()

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 2:
            raise ValueError(f"rank must be an integer >= 2, got {self.r!r}")
        active = tuple((int(i), int(j)) for i, j in self.active)
        object.__setattr__(self, "active", active)
        if len(set(active)) != len(active):
            raise ValueError("duplicate active pair")
        for i, j in active:
            _check_pair(self.r, i, j)

    def roots(self) -> np.ndarray:
        """Integer matrix whose rows are the active root vectors."""
        out = np.zeros((len(self.active), self.r), dtype=np.int64)
        for row, (i, j) in enumerate(self.active):
            out[row, i - 1] = 1
            out[row, j - 1] = -1
        return out


def _check_pair(r: int, i: int, j: int) -> None:
    if not (1 <= i <= r and 1 <= j <= r):
        raise IndexError(f"pair ({i},{j}) out of range 1..{r}")
    if i == j:
        raise ValueError(f"pair ({i},{j}) has i == j")


def root_vector(ws: WeightSystem, i: int, j: int) -> TraceZeroVector:
    """Return v_{i,j}: +1 in slot i, -1 in slot j (1-based)."""
    _check_pair(ws.r, i, j)
    x = [0] * ws.r
    x[i - 1] = 1
    x[j - 1] = -1
    return TraceZeroVector(x)


def project_trace_zero(x: Sequence) -> TraceZeroVector:
    """Subtract the mean of ``x`` from every entry.

    Exact inputs stay exact; anything else is computed in float64.
    """
    x = tuple(x)
    if is_exact(x):
        mean = Fraction(sum(Fraction(v) for v in x), len(x))
        return TraceZeroVector(Fraction(v) - mean for v in x)
    arr = np.asarray(x, dtype=float)
    out = arr - math.fsum(arr) / len(arr)
    # second pass removes the cancellation error of the first
    out -= math.fsum(out) / len(out)
    return TraceZeroVector(out.tolist())


def dot(x: Sequence, y: Sequence):
    if len(x) != len(y):
        raise ValueError("dimension mismatch")
    return sum(a * b for a, b in zip(x, y))


def rref(rows: Sequence[Sequence]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form over the rationals; returns (matrix, pivot columns)."""
    m = [[Fraction(v) for v in row] for row in rows]
    if not m:
        return [], []
    ncols = len(m[0])
    pivots: list[int] = []
    lead = 0
    for col in range(ncols):
        pivot_row = next((i for i in range(lead, len(m)) if m[i][col] != 0), None)
        if pivot_row is None:
            continue
        m[lead], m[pivot_row] = m[pivot_row], m[lead]
        p = m[lead][col]
        m[lead] = [v / p for v in m[lead]]
        for i in range(len(m)):
            if i != lead and m[i][col] != 0:
                f = m[i][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[lead])]
        pivots.append(col)
        lead += 1
        if lead == len(m):
            break
    return m, pivots


def rank(rows: Sequence[Sequence]) -> int:
    return len(rref(rows)[1]) if rows else 0


def kernel(rows: Sequence[Sequence], ncols: int) -> list[tuple[Fraction, ...]]:
    """Exact basis of {w : row . w = 0 for every row}."""
    if not rows:
        return [tuple(Fraction(int(i == k)) for i in range(ncols)) for k in range(ncols)]
    m, pivots = rref(rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        w = [Fraction(0)] * ncols
        w[f] = Fraction(1)
        for row, pc in zip(m, pivots):
            w[pc] = -row[f]
        basis.append(tuple(w))
    return basis


def trace_zero_kernel(rows: Sequence[Sequence], r: int) -> list[tuple[Fraction, ...]]:
    """Exact basis of {w in V : row . w = 0 for every row}."""
    return kernel([*rows, [1] * r], r)


def primitive_integer(w: Sequence) -> tuple[int, ...]:
    """Scale a nonzero rational vector to coprime integers, keeping its direction."""
    w = [Fraction(v) for v in w]
    if all(v == 0 for v in w):
        raise ValueError("zero vector has no primitive form")
    den = 1
    for v in w:
        den = den * v.denominator // gcd(den, v.denominator)
    ints = [int(v * den) for v in w]
    g = 0
    for v in ints:
        g = gcd(g, v)
    return tuple(v // g for v in ints)
