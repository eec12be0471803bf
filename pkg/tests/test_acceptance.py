"""Acceptance criteria, one test per criterion (the refinement clause of 2 is split out).

Each test records a PASS/FAIL line that is repeated in the terminal summary.
"""

import time

import numpy as np
from builders import manufactured_problem, positive_problem, random_field, random_problem, two_entry_problem

from hetoda.cone import ConeStatus, check_condition_v, oracle_condition_v, verify_certificate
from hetoda.functional import (
    Asymptotics,
    geodesic_scan,
    gradient,
    m_restricted,
    m_path_integral,
    polyline_path,
    residual_mu,
    scaled_path,
    second_variation,
    weighted_exponentials,
)
from hetoda.grid import PeriodicGrid, inner, integrate
from hetoda.problem import assemble, make_cyclic
from hetoda.selftest import random_cone_instance
from hetoda.solver import SolveOptions, SolveStatus, solve
from hetoda.verify import Criticality, criticality_check, full_he_residual
from hetoda.weights import WeightSystem


def test_1_cone_oracle_equivalence(record):
    rng = np.random.default_rng(20240601)
    start = time.perf_counter()
    agree = verified = 0
    for _ in range(200):
        ws, gamma = random_cone_instance(rng, max_r=5, max_active=8)
        cert = check_condition_v(ws, gamma)
        agree += cert.status is oracle_condition_v(ws, gamma).status
        verify_certificate(ws, cert)
        verified += 1
    elapsed = time.perf_counter() - start
    ok = agree == 200 and verified == 200 and elapsed < 5.0
    record("1 cone/oracle equivalence", ok, f"{agree}/200 agree, {verified}/200 verified, {elapsed:.2f} s")
    assert ok


def test_2_manufactured_solution(record):
    p, xi_star = manufactured_problem(64)
    start = time.perf_counter()
    xi, rep = solve(p, SolveOptions(tol=1e-10))
    elapsed = time.perf_counter() - start
    err = float(np.max(np.abs(xi - xi_star)))
    ok = (rep.status is SolveStatus.CONVERGED and err < 1e-8 and rep.residual_linf < 1e-10
          and rep.iterations < 30 and elapsed < 10.0)
    record("2 manufactured solution N=64", ok,
           f"{rep.status}, err {err:.2e}, |R| {rep.residual_linf:.2e}, {rep.iterations} it, {elapsed:.2f} s")
    assert ok


def test_2_manufactured_refinement(record):
    errs = {}
    for n in (32, 64):
        p, xi_star = manufactured_problem(n)
        xi, rep = solve(p, SolveOptions(tol=1e-10))
        assert rep.status is SolveStatus.CONVERGED
        errs[n] = float(np.max(np.abs(xi - xi_star)))
    ratio = errs[32] / errs[64]
    ok = ratio > 1e2
    record("2 refinement N=32->64 error ratio > 1e2", ok,
           f"err32 {errs[32]:.2e}, err64 {errs[64]:.2e}, ratio {ratio:.2f}")
    assert ok


def test_3_gradient_hessian(record):
    rng = np.random.default_rng(3)
    worst_g = worst_h = worst_r = 0.0
    for _ in range(20):
        p = random_problem(rng, n=32)
        xi, eta = random_field(rng, p), random_field(rng, p)
        eps = 1e-5
        fd = (m_restricted(p, xi + eps * eta).total - m_restricted(p, xi - eps * eta).total) / (2 * eps)
        an = inner(gradient(p, xi), eta)
        worst_g = max(worst_g, abs(fd - an) / abs(an))
        eps = 1e-3
        m0, mp, mm = (m_restricted(p, xi + s * eps * eta).total for s in (0, 1, -1))
        q = second_variation(p, xi, eta)
        worst_h = max(worst_h, abs((mp - 2 * m0 + mm) / eps**2 - q) / abs(q))
        worst_r = max(worst_r, float(np.max(np.abs(residual_mu(p, xi) - 2 * gradient(p, xi)))))
    ok = worst_g < 1e-6 and worst_h < 1e-6 and worst_r < 1e-13
    record("3 gradient/Hessian checks", ok,
           f"grad rel {worst_g:.1e}, hess rel {worst_h:.1e}, R-2g {worst_r:.1e}")
    assert ok


def test_4_convexity_along_geodesics(record):
    rng = np.random.default_rng(4)
    worst = np.inf
    t = np.linspace(-1.0, 1.0, 21)
    for _ in range(50):
        p = random_problem(rng, n=16)
        xi0, eta = random_field(rng, p), random_field(rng, p, amp=1.0)
        m = np.array([m_restricted(p, xi0 + s * eta).total for s in t])
        worst = min(worst, float(np.min(m[2:] - 2 * m[1:-1] + m[:-2])))
    ok = worst >= -1e-10
    record("4 convexity along 50 geodesics", ok, f"min second difference {worst:.3e}")
    assert ok


def test_5_positive_side(record):
    p = positive_problem(64)
    cert = check_condition_v(p.ws, p.gamma_exact)
    xi, rep = solve(p)
    crit = criticality_check(p, xi)
    ce = weighted_exponentials(p, xi)
    lam = np.array([integrate(ce[k]) for k in range(len(p.ws.active))]) / (4 * np.pi)
    # the witness reproduces -gamma = sum lambda v
    closure = float(np.max(np.abs(lam @ p.roots + p.gamma)))
    ok = (cert.status is ConeStatus.FEASIBLE and rep.status is SolveStatus.CONVERGED
          and rep.residual_linf < 1e-10 and crit.verdict is Criticality.FULL_CRITICAL_POINT
          and crit.offdiag_linf < 1e-10 and bool(np.all(lam > 0)) and closure < 1e-9)
    record("5 positive side", ok,
           f"{cert.status}, {rep.status}, |R| {rep.residual_linf:.1e}, {crit.verdict}, "
           f"offdiag {crit.offdiag_linf:.1e}, lambda {np.array2string(lam, precision=4)}")
    assert ok


def test_6_negative_side(record):
    grid = PeriodicGrid(32)
    a = [grid.constant(2 * np.pi), grid.constant(-2 * np.pi)]
    p = assemble(WeightSystem(2, ()), grid, {}, a=a)
    cert = check_condition_v(p.ws, p.gamma_exact)
    w = np.array(cert.farkas_w, dtype=float)
    eta = np.broadcast_to(w[:, None, None], (2,) + grid.shape).copy()
    scan = geodesic_scan(p, np.zeros_like(eta), eta, np.linspace(0, 10, 11))
    _, rep = solve(p)
    cross = rep.certificate_cross_check
    ok = (cert.status is ConeStatus.INFEASIBLE and cert.farkas_w == (-1, 1)
          and scan.classification is Asymptotics.DIVERGES_DOWN
          and rep.status is SolveStatus.DIVERGENCE_DETECTED
          and cross.status is ConeStatus.INFEASIBLE and cross.farkas_w == (-1, 1))
    record("6 negative side", ok,
           f"{cert.status} w={cert.farkas_w}, probe {scan.classification}, {rep.status}, "
           f"cross-check {cross.status} w={cross.farkas_w}")
    assert ok


def test_7_path_independence(record):
    rng = np.random.default_rng(7)
    p = random_problem(rng, n=32)
    xi = random_field(rng, p)
    closed = m_restricted(p, xi).total
    detour = random_field(rng, p)
    paths = {
        "polyline via detour": polyline_path([np.zeros_like(xi), detour, 0.5 * xi + detour, xi]),
        "scaled t^2": scaled_path(xi, lambda t: t * t, lambda t: 2 * t),
    }
    errs = {name: abs(m_path_integral(p, path, panels=64) - closed) for name, path in paths.items()}
    ok = all(e < 1e-8 for e in errs.values())
    record("7 path independence", ok, ", ".join(f"{k}: {v:.1e}" for k, v in errs.items()))
    assert ok


def test_8_offdiagonal_criterion(record):
    two = two_entry_problem(32)
    xi, rep = solve(two)
    two_crit = criticality_check(two, xi)
    cyc = make_cyclic(3, PeriodicGrid(32), ["1", "2", "1+sin(2*pi*x)^2"])
    xi_c, rep_c = solve(cyc)
    cyc_crit = criticality_check(cyc, xi_c)
    ok = (rep.status is SolveStatus.CONVERGED and two_crit.verdict is Criticality.DIAGONAL_ONLY
          and two_crit.offdiag_linf > 1e-3 and rep_c.status is SolveStatus.CONVERGED
          and cyc_crit.verdict is Criticality.FULL_CRITICAL_POINT and cyc_crit.offdiag_linf < 1e-10)
    record("8 off-diagonal criterion", ok,
           f"two-entry {two_crit.verdict} {two_crit.offdiag_linf:.2e}, "
           f"cyclic {cyc_crit.verdict} {cyc_crit.offdiag_linf:.1e}")
    assert ok


def test_9_diagonal_equals_half_residual(record):
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(20):
        p = random_problem(rng, n=32)
        xi = random_field(rng, p)
        diff = full_he_residual(p, xi).diag - 0.5 * residual_mu(p, xi)
        worst = max(worst, float(np.max(np.abs(diff))))
    ok = worst < 1e-12
    record("9 diag(full residual) = R/2", ok, f"max deviation {worst:.1e}")
    assert ok
