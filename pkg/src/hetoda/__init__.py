"""Diagonal Hermitian-Einstein metrics for line-split Higgs bundles on the flat torus.

Submodules: ``weights`` (trace-zero lattice, exact linear algebra), ``cone``
(exact cone condition with certificates), ``grid`` (spectral operators and field
I/O), ``fieldexpr`` (field expressions), ``problem`` (equation data),
``functional`` (restricted functional and probes), ``solver`` (Newton-Krylov),
``verify`` (full residual), ``config`` and ``cli``.
"""

from .cone import ConeCertificate, ConeStatus, check_condition_v, oracle_condition_v, verify_certificate
from .functional import Asymptotics, geodesic_scan, gradient, m_restricted, residual_mu, second_variation
from .grid import PeriodicGrid
from .problem import HiggsProblem, assemble, from_entries, make_cyclic
from .solver import SolveOptions, SolveStatus, solve
from .verify import Criticality, criticality_check, full_he_residual
from .weights import TraceZeroVector, WeightSystem

__version__ = "0.1.0"

__all__ = [
    "Asymptotics", "ConeCertificate", "ConeStatus", "Criticality", "HiggsProblem", "PeriodicGrid",
    "SolveOptions", "SolveStatus", "TraceZeroVector", "WeightSystem", "assemble", "check_condition_v",
    "criticality_check", "from_entries", "full_he_residual", "geodesic_scan", "gradient", "m_restricted",
    "make_cyclic", "oracle_condition_v", "residual_mu", "second_variation", "solve", "verify_certificate",
]
