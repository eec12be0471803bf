"""Seeded invariant checks runnable from an installed package (``hetoda selftest``)."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .cone import check_condition_v, oracle_condition_v
from .functional import gradient, m_restricted, project_pointwise, residual_mu, second_variation
from .grid import PeriodicGrid, band_limited_random, dirichlet, inner, integrate, laplacian, poisson_solve
from .problem import from_entries, make_cyclic
from .verify import full_he_residual
from .weights import WeightSystem


def random_cone_instance(rng: np.random.Generator, max_r: int = 5, max_active: int = 8):
    r = int(rng.integers(2, max_r + 1))
    pairs = [(i, j) for i in range(1, r + 1) for j in range(1, r + 1) if i != j]
    k = int(rng.integers(0, min(max_active, len(pairs)) + 1))
    active = tuple(pairs[s] for s in rng.choice(len(pairs), size=k, replace=False))
    if rng.random() < 0.3:
        # boundary-prone: -gamma a nonnegative integer combination with some zero weights
        gamma = [Fraction(0)] * r
        for i, j in active:
            lam = int(rng.integers(0, 3))
            gamma[i - 1] -= lam
            gamma[j - 1] += lam
    else:
        head = [Fraction(int(rng.integers(-10, 11)), int(rng.integers(1, 5))) for _ in range(r - 1)]
        gamma = head + [-sum(head, Fraction(0))]
    return WeightSystem(r, active), tuple(gamma)


def random_problem(rng: np.random.Generator, n: int = 32):
    r = int(rng.integers(2, 5))
    pairs = [(i, j) for i in range(1, r + 1) for j in range(1, r + 1) if i != j]
    sel = rng.choice(len(pairs), size=int(rng.integers(1, len(pairs) + 1)), replace=False)
    phi = {pairs[s]: (0.5 * band_limited_random(rng, n, 2), 0.5 * band_limited_random(rng, n, 2)) for s in sel}
    k = np.exp(0.3 * band_limited_random(rng, n, 2, (r,)))
    a = project_pointwise(band_limited_random(rng, n, 3, (r,)))
    p = from_entries(r, PeriodicGrid(n), phi, k, a, phi0={1: (band_limited_random(rng, n, 2), 0.0)})
    xi = project_pointwise(0.5 * band_limited_random(rng, n, 3, (r,)))
    eta = project_pointwise(0.5 * band_limited_random(rng, n, 3, (r,)))
    return p, xi, eta


def _checks(rng):
    for _ in range(50):
        ws, gamma = random_cone_instance(rng)
        a, b = check_condition_v(ws, gamma), oracle_condition_v(ws, gamma)
        if a.status is not b.status:
            yield "cone/oracle agreement", False
            break
    else:
        yield "cone/oracle agreement", True

    n = 32
    f, g = band_limited_random(rng, n, 4, (2,))
    yield "laplacian self-adjoint", abs(inner(f, laplacian(g)) - inner(g, laplacian(f))) <= 1e-12 * abs(inner(f, laplacian(g)))
    yield "dirichlet identity", abs(dirichlet(f) - integrate(f * laplacian(f))) <= 1e-12 * dirichlet(f)
    h = g - integrate(g)
    yield "poisson round trip", float(np.max(np.abs(poisson_solve(laplacian(h)) - h))) < 1e-11

    p, xi, eta = random_problem(rng)
    eps = 1e-4
    fd = (m_restricted(p, xi + eps * eta).total - m_restricted(p, xi - eps * eta).total) / (2 * eps)
    an = inner(gradient(p, xi), eta)
    yield "gradient vs central difference", abs(fd - an) <= 1e-6 * abs(an)
    eps = 1e-3
    sd = (m_restricted(p, xi + eps * eta).total - 2 * m_restricted(p, xi).total
          + m_restricted(p, xi - eps * eta).total) / eps**2
    q = second_variation(p, xi, eta)
    yield "second variation vs second difference", abs(sd - q) <= 1e-6 * abs(q)
    yield "residual = 2 gradient", float(np.max(np.abs(residual_mu(p, xi) - 2 * gradient(p, xi)))) < 1e-13
    he = full_he_residual(p, xi)
    yield "diagonal residual = residual/2", float(np.max(np.abs(he.diag - 0.5 * residual_mu(p, xi)))) < 1e-12
    yield "hermitian residual", he.hermitian_defect < 1e-13 * max(1.0, he.diag_linf)

    cyc = make_cyclic(3, PeriodicGrid(16), ["1", "1", "1"])
    zero = np.zeros((3, 16, 16))
    yield "cyclic: xi = 0 solves", float(np.max(np.abs(residual_mu(cyc, zero)))) < 1e-12


def run(seed: int = 0, out=print) -> bool:
    rng = np.random.default_rng(seed)
    ok = True
    for name, passed in _checks(rng):
        ok &= bool(passed)
        out(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
