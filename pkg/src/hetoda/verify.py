"""Full Hermitian-Einstein residual and the off-diagonal criticality criterion.

With h = diag(e^{f_a} k_a), Phi = phi dz and the adjoint rule
(phi^{*h})_{ab} = (h_b / h_a) conj(phi_{ba}), the grid convention block gives

    i Lambda F_h            = diag(a_a + 1/2 Delta f_a)
    i Lambda [Phi ^ Phi^*h] = 2 (phi phi^*h - phi^*h phi).

Matrices are reported in the h-unitary frame B = h^{1/2} A h^{-1/2}, where an
h-selfadjoint endomorphism becomes an ordinary Hermitian matrix and entrywise
norms are the h-norms. The diagonal is frame independent. The commutator is
formed directly from psi = h^{1/2} phi h^{-1/2}, so only the square-root weight
is ever exponentiated.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .functional import check_potential, residual_mu, trace_zero_laplacian
from .grid import integrate
from .problem import HiggsProblem


class Criticality(enum.Enum):
    FULL_CRITICAL_POINT = "FullCriticalPoint"
    DIAGONAL_ONLY = "DiagonalOnly"

    def __str__(self) -> str:
        return self.value


class ConventionError(AssertionError):
    pass


@dataclass(frozen=True)
class HEResidual:
    diag: np.ndarray  # (r, n, n) real
    offdiag: np.ndarray  # (r, r, n, n) complex, zero diagonal, h-unitary frame
    diag_linf: float
    diag_l2: float
    offdiag_linf: float
    offdiag_l2: float
    hermitian_defect: float

    def offdiag_heatmap(self) -> np.ndarray:
        """Pointwise Frobenius norm of the off-diagonal part."""
        return np.sqrt(np.sum(np.abs(self.offdiag) ** 2, axis=(0, 1)))


def higgs_matrix(p: HiggsProblem) -> np.ndarray:
    """(r, r, n, n) complex field of Phi entries, including the diagonal part."""
    r = p.r
    phi = np.zeros((r, r) + p.grid.shape, dtype=complex)
    for (i, j) in p.ws.active:
        phi[i - 1, j - 1] = p.phi((i, j))
    for alpha, entry in p.phi0.items():
        phi[alpha - 1, alpha - 1] = entry
    return phi


def full_he_residual(p: HiggsProblem, xi: np.ndarray) -> HEResidual:
    """i Lambda (F_h + [Phi ^ Phi^*h]) for the diagonal metric defined by ``xi``."""
    xi = check_potential(p, xi)
    r = p.r
    phi = higgs_matrix(p)
    logh = xi + np.log(p.k)
    # psi = h^{1/2} phi h^{-1/2}; its h-adjoint in this frame is the conjugate transpose.
    # Entries of phi that vanish stay zero even where the weight overflows.
    half = 0.5 * (logh[:, None] - logh[None, :])
    with np.errstate(over="ignore", invalid="ignore"):
        psi = np.where(phi != 0, phi * np.exp(half), 0.0)
    psi_star = np.conj(np.swapaxes(psi, 0, 1))
    B = 2.0 * (np.einsum("acij,cbij->abij", psi, psi_star) - np.einsum("acij,cbij->abij", psi_star, psi))
    idx = np.arange(r)
    B[idx, idx] += p.a + 0.5 * trace_zero_laplacian(xi)

    diag = B[idx, idx].real.copy()
    trace = float(np.max(np.abs(diag.sum(axis=0))))
    scale = max(1.0, float(np.max(np.abs(diag))))
    if trace > 1e-9 * scale:
        raise ConventionError(f"pointwise trace of the residual is {trace:.3e}, expected 0")
    off = B.copy()
    off[idx, idx] = 0.0
    herm = float(np.max(np.abs(B - np.conj(np.swapaxes(B, 0, 1))))) if B.size else 0.0
    off_sq = np.sum(np.abs(off) ** 2, axis=(0, 1))
    return HEResidual(
        diag=diag,
        offdiag=off,
        diag_linf=float(np.max(np.abs(diag))),
        diag_l2=float(np.sqrt(np.sum(integrate(diag**2)))),
        offdiag_linf=float(np.max(np.abs(off))) if off.size else 0.0,
        offdiag_l2=float(np.sqrt(integrate(off_sq))),
        hermitian_defect=herm,
    )


@dataclass(frozen=True)
class CriticalityResult:
    verdict: Criticality
    offdiag_linf: float
    residual_linf: float
    # True when xi does not solve the diagonal system to tolerance
    advisory: bool
    he: HEResidual

    def to_text(self) -> str:
        he = self.he
        lines = [
            f"verdict: {self.verdict}",
            f"advisory: {self.advisory}",
            f"residual_mu_linf: {self.residual_linf:.6e}",
            f"diag_linf: {he.diag_linf:.6e}",
            f"diag_l2: {he.diag_l2:.6e}",
            f"offdiag_linf: {he.offdiag_linf:.6e}",
            f"offdiag_l2: {he.offdiag_l2:.6e}",
            f"hermitian_defect: {he.hermitian_defect:.3e}",
        ]
        return "\n".join(lines) + "\n"


def criticality_check(p: HiggsProblem, xi: np.ndarray, tol: float = 1e-8) -> CriticalityResult:
    """FullCriticalPoint iff the off-diagonal part (max norm) is below ``tol``."""
    he = full_he_residual(p, xi)
    res = float(np.max(np.abs(residual_mu(p, xi))))
    verdict = Criticality.FULL_CRITICAL_POINT if he.offdiag_linf < tol else Criticality.DIAGONAL_ONLY
    return CriticalityResult(verdict, he.offdiag_linf, res, res >= tol, he)
