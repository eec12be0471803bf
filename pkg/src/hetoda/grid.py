"""Periodic fields on the unit-area flat torus R^2/Z^2 and their spectral calculus.

Scalar fields are float64 arrays of shape ``(n, n)``; ``values[i, j]`` is the
sample at ``(x, y) = (i/n, j/n)``. Stacks of fields carry extra leading axes and
every operator here acts on the last two axes.

Convention block, fixed for the whole package: complex coordinate z = x + iy,
Kaehler form (i/2) dz ^ dzbar (unit volume), contraction
Lambda(i g dz ^ dzbar) = 2g, hence i Lambda dbar d f = (1/2) Delta f with
Delta = -(d_xx + d_yy) the nonnegative Laplacian.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft

FOUR_PI_SQ = 4.0 * np.pi**2

HEF1_MAGIC = b"HEF1"
HEF1_VERSION = 1
_HEADER = struct.Struct("<4sIII")


def _workers() -> int:
    env = os.environ.get("HETODA_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class PeriodicGrid:
    n: int

    def __post_init__(self):
        n = self.n
        if int(n) != n or n < 8 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 8, got {n!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        s = np.arange(self.n) / self.n
        return np.meshgrid(s, s, indexing="ij")

    def symbol(self) -> np.ndarray:
        """Laplacian multiplier 4 pi^2 |k|^2 in the rfft2 layout."""
        return _symbol(self.n)

    def constant(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))

    @classmethod
    def of(cls, f: np.ndarray) -> "PeriodicGrid":
        f = np.asarray(f)
        if f.ndim < 2 or f.shape[-1] != f.shape[-2]:
            raise ValueError(f"not a square periodic field: shape {f.shape}")
        return cls(f.shape[-1])


_SYMBOL_CACHE: dict[int, np.ndarray] = {}


def _symbol(n: int) -> np.ndarray:
    if n not in _SYMBOL_CACHE:
        k1 = np.fft.fftfreq(n, d=1.0 / n)
        k2 = np.fft.rfftfreq(n, d=1.0 / n)
        sym = FOUR_PI_SQ * (k1[:, None] ** 2 + k2[None, :] ** 2)
        sym.setflags(write=False)
        _SYMBOL_CACHE[n] = sym
    return _SYMBOL_CACHE[n]


def _rfft_weights(n: int) -> np.ndarray:
    # columns 1..n/2-1 stand for two conjugate modes each
    w = np.full(n // 2 + 1, 2.0)
    w[0] = w[-1] = 1.0
    return w


def _check_finite(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("field contains non-finite samples")
    return f


def _rfft(f):
    return scipy.fft.rfft2(f, axes=(-2, -1), workers=_workers())


def _irfft(F, n):
    return scipy.fft.irfft2(F, s=(n, n), axes=(-2, -1), workers=_workers())


def laplacian(f: np.ndarray) -> np.ndarray:
    """Spectral Delta f = -(f_xx + f_yy); the mean component maps to zero."""
    f = _check_finite(f)
    n = PeriodicGrid.of(f).n
    return _irfft(_rfft(f) * _symbol(n), n)


def integrate(f: np.ndarray) -> np.ndarray | float:
    """Integral over the unit torus, i.e. the sample mean (per leading index)."""
    f = np.asarray(f, dtype=float)
    n = PeriodicGrid.of(f).n
    flat = np.ascontiguousarray(f).reshape(f.shape[:-2] + (n * n,))
    out = np.sum(flat, axis=-1) / (n * n)
    return float(out) if out.ndim == 0 else out


def inner(f: np.ndarray, g: np.ndarray) -> float:
    """L^2 pairing, summed over any stack axes."""
    return float(np.sum(integrate(np.asarray(f) * np.asarray(g))))


def l2_norm(f: np.ndarray) -> float:
    return float(np.sqrt(inner(f, f)))


def dirichlet(f: np.ndarray) -> np.ndarray | float:
    """Dirichlet energy  int |grad f|^2 = sum_k 4 pi^2 |k|^2 |fhat_k|^2."""
    f = _check_finite(f)
    n = PeriodicGrid.of(f).n
    F = _rfft(f) / (n * n)
    dens = (np.abs(F) ** 2) * _symbol(n) * _rfft_weights(n)
    flat = dens.reshape(dens.shape[:-2] + (-1,))
    out = np.sum(flat, axis=-1)
    return float(out) if out.ndim == 0 else out


def poisson_solve(g: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    """Zero-mean solution f of Delta f = g.

    Raises ValueError if ``g`` has nonzero mean beyond ``atol`` (scaled by max|g|).
    """
    g = _check_finite(g)
    n = PeriodicGrid.of(g).n
    mean = np.atleast_1d(integrate(g))
    scale = max(1.0, float(np.max(np.abs(g))))
    if np.any(np.abs(mean) > atol * scale):
        raise ValueError(f"Poisson data has nonzero mean {mean.max():.3e}")
    G = _rfft(g)
    sym = _symbol(n).copy()
    sym[0, 0] = 1.0
    F = G / sym
    F[..., 0, 0] = 0.0
    return _irfft(F, n)


def shifted_inverse(g: np.ndarray, mu: float) -> np.ndarray:
    """Apply (Delta + mu)^{-1} spectrally, mu > 0."""
    n = PeriodicGrid.of(g).n
    return _irfft(_rfft(g) / (_symbol(n) + mu), n)


def band_limited_random(rng: np.random.Generator, n: int, kmax: int = 4, shape=()) -> np.ndarray:
    """Smooth random field(s) with Fourier content |k_i| <= kmax."""
    x, y = PeriodicGrid(n).coords()
    out = np.zeros(tuple(shape) + (n, n))
    for k1 in range(-kmax, kmax + 1):
        for k2 in range(0, kmax + 1):
            amp = rng.normal(size=tuple(shape) + (2,)) / (1.0 + k1 * k1 + k2 * k2)
            phase = 2 * np.pi * (k1 * x + k2 * y)
            out += amp[..., 0, None, None] * np.cos(phase) + amp[..., 1, None, None] * np.sin(phase)
    return out


# ---------------------------------------------------------------------------
# field files


def write_hef1(path: str | Path, planes: np.ndarray) -> None:
    """Write planes of shape (p, n, n) (or a single (n, n) plane) as HEF1."""
    planes = np.asarray(planes, dtype=float)
    if planes.ndim == 2:
        planes = planes[None]
    if planes.ndim != 3 or planes.shape[1] != planes.shape[2]:
        raise ValueError(f"expected (planes, n, n), got {planes.shape}")
    p, n, _ = planes.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(HEF1_MAGIC, HEF1_VERSION, p, n))
        fh.write(np.ascontiguousarray(planes, dtype="<f8").tobytes())


def read_hef1(path: str | Path) -> np.ndarray:
    """Read an HEF1 file into an array of shape (p, n, n)."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated HEF1 header")
    magic, version, p, n = _HEADER.unpack_from(data)
    if magic != HEF1_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != HEF1_VERSION:
        raise ValueError(f"{path}: unsupported HEF1 version {version}")
    expected = _HEADER.size + 8 * p * n * n
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    planes = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(p, n, n)
    return planes.astype(float)


def write_csv(path: str | Path, plane: np.ndarray) -> None:
    plane = np.asarray(plane, dtype=float)
    if plane.ndim != 2:
        raise ValueError("CSV export takes one plane")
    np.savetxt(path, plane, delimiter=",", fmt="%.17g")


def read_csv(path: str | Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)
