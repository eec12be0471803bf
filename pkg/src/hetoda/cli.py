"""Command line front end.

Exit codes::

    check-cone  0 Feasible, 2 Infeasible, 1 error
    solve       0 Converged, 3 DivergenceDetected, 4 MaxIterations, 1 error
    probe       0 ok, 1 error
    verify      0 FullCriticalPoint, 5 DiagonalOnly, 1 error
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, cyclic_config_text, load_config
from .cone import ConeStatus
from .fieldexpr import ExprDomainError, ExprSyntaxError, parse
from .functional import ExponentialOverflow, geodesic_scan
from .grid import read_hef1, write_csv, write_hef1
from .solver import SolverError, SolveStatus, flat_subspace, solve
from .verify import Criticality, criticality_check

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_DIVERGED = 3
EXIT_MAX_ITER = 4
EXIT_DIAGONAL_ONLY = 5

_SOLVE_EXIT = {
    SolveStatus.CONVERGED: EXIT_OK,
    SolveStatus.DIVERGENCE_DETECTED: EXIT_DIVERGED,
    SolveStatus.MAX_ITERATIONS: EXIT_MAX_ITER,
}


def _fmt_vec(v) -> str:
    return "(" + ", ".join(str(x) for x in v) + ")"


def _problem_header(cfg: RunConfig, p) -> list[str]:
    lines = [
        f"r: {p.r}",
        f"n: {p.n}",
        "active: " + (" ".join(f"({i},{j})" for i, j in p.ws.active) or "none"),
        "gamma: (" + ", ".join(f"{g:.12g}" for g in p.gamma) + ")",
        f"gamma_exact: {_fmt_vec(p.gamma_exact)}",
        f"gamma_rounding: {p.gamma_rounding:.3e}",
    ]
    lines += [f"warning: {w}" for w in p.warnings]
    return lines


def _output_dir(cfg: RunConfig, override: str | None) -> Path:
    out = Path(override) if override else Path(cfg.base_dir) / cfg.output
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_check_cone(cfg: RunConfig, args) -> int:
    from .cone import check_condition_v

    p = cfg.build_problem()
    cert = check_condition_v(p.ws, p.gamma_exact)
    cert = dataclasses.replace(cert, rounding_radius=p.gamma_rounding)
    lines = _problem_header(cfg, p)
    lines += cert.report().splitlines()
    lines.append(f"flat_subspace_dim: {flat_subspace(p).dim}")
    print("\n".join(lines))
    return EXIT_OK if cert.status is ConeStatus.FEASIBLE else EXIT_INFEASIBLE


def cmd_solve(cfg: RunConfig, args) -> int:
    p = cfg.build_problem()
    try:
        xi, report = solve(p, cfg.solver, cfg.initial_guess())
    except (SolverError, ExponentialOverflow) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out = _output_dir(cfg, args.out)
    write_hef1(out / "solution.hef1", xi)
    text = "\n".join(_problem_header(cfg, p)) + "\n" + report.to_text()
    (out / "solve_report.txt").write_text(text)
    crit = criticality_check(p, xi, tol=args.offdiag_tol)
    (out / "verify_report.txt").write_text(crit.to_text())
    print(text, end="")
    print(f"solution: {out / 'solution.hef1'}")
    return _SOLVE_EXIT[report.status]


def _direction(cfg: RunConfig, p, spec: str) -> np.ndarray:
    shape = (p.r,) + p.grid.shape
    spec = spec.strip()
    if spec == "farkas":
        from .cone import check_condition_v

        cert = check_condition_v(p.ws, p.gamma_exact)
        if cert.farkas_w is None:
            raise ConfigError("direction 'farkas' requested but condition (v) holds")
        w = np.array(cert.farkas_w, dtype=float)
        return np.broadcast_to(w[:, None, None], shape).copy()
    kind, _, body = spec.partition(":")
    if kind == "const":
        try:
            w = np.array([float(s) for s in body.split(",")])
        except ValueError:
            raise ConfigError(f"bad constant direction {spec!r}") from None
        if w.shape != (p.r,) or abs(w.sum()) > 1e-12 * max(1.0, np.abs(w).max()):
            raise ConfigError(f"direction {spec!r} must have {p.r} entries summing to 0")
        return np.broadcast_to(w[:, None, None], shape).copy()
    if kind == "expr":
        parts = body.split("|")
        if len(parts) != p.r:
            raise ConfigError(f"direction {spec!r} needs {p.r} '|'-separated expressions")
        eta = np.stack([cfg.field(s, f"direction component {i + 1}") for i, s in enumerate(parts)])
        if np.max(np.abs(eta.sum(axis=0))) > 1e-12 * max(1.0, np.abs(eta).max()):
            raise ConfigError(f"direction {spec!r} is not trace-zero pointwise")
        return eta
    raise ConfigError(f"unknown direction {spec!r} (farkas, const:..., expr:...)")


def cmd_probe(cfg: RunConfig, args) -> int:
    p = cfg.build_problem()
    if not cfg.probe.directions:
        raise ConfigError("[probe] has no direction entries")
    out = _output_dir(cfg, args.out)
    xi0 = np.zeros((p.r,) + p.grid.shape)
    for idx, spec in enumerate(cfg.probe.directions, start=1):
        eta = _direction(cfg, p, spec)
        scan = geodesic_scan(p, xi0, eta, cfg.probe.t_list())
        path = out / f"probe_{idx}.csv"
        scan.write_csv(path)
        slope = "n/a" if scan.linear_slope is None else f"{scan.linear_slope:.12g}"
        print(f"direction.{idx}: {spec} -> {scan.classification} (linear_slope={slope}, csv={path})")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    p = cfg.build_problem()
    try:
        xi = read_hef1(args.solution)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if xi.shape != (p.r,) + p.grid.shape:
        print(f"error: solution has shape {xi.shape}, config expects {(p.r,) + p.grid.shape}", file=sys.stderr)
        return EXIT_ERROR
    crit = criticality_check(p, xi, tol=args.offdiag_tol)
    print(crit.to_text(), end="")
    if args.heatmap:
        write_csv(args.heatmap, crit.he.offdiag_heatmap())
    return EXIT_OK if crit.verdict is Criticality.FULL_CRITICAL_POINT else EXIT_DIAGONAL_ONLY


def cmd_gen_cyclic(args) -> int:
    for src in (args.phi or []) + (args.k or []) + (args.a or []):
        parse(src)
    text = cyclic_config_text(args.r, args.n, args.phi, args.k, args.a)
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run

    return EXIT_OK if run(seed=args.seed) else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hetoda", description="Diagonal Hermitian-Einstein solver and verifier")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config")
        sp.add_argument("--dump-config", action="store_true", help="print the normalized config and exit")
        return sp

    with_config("check-cone", "decide the cone condition with an exact certificate")
    sp = with_config("solve", "minimize the restricted functional")
    sp.add_argument("--out", help="output directory (overrides [output] dir)")
    sp.add_argument("--offdiag-tol", type=float, default=1e-8)
    sp = with_config("probe", "scan the functional along geodesic directions")
    sp.add_argument("--out", help="output directory (overrides [output] dir)")
    sp = with_config("verify", "full Hermitian-Einstein residual of a solution file")
    sp.add_argument("solution")
    sp.add_argument("--offdiag-tol", type=float, default=1e-8)
    sp.add_argument("--heatmap", help="write the off-diagonal norm field as CSV")

    sp = sub.add_parser("gen-cyclic", help="write a cyclic configuration")
    sp.add_argument("--r", type=int, required=True)
    sp.add_argument("--n", type=int, default=64)
    sp.add_argument("--phi", action="append", help="entry expression, repeat r times")
    sp.add_argument("--k", action="append")
    sp.add_argument("--a", action="append")
    sp.add_argument("-o", "--output")
    sp = sub.add_parser("selftest", help="run the built-in invariant checks")
    sp.add_argument("--seed", type=int, default=0)
    return ap


_COMMANDS = {
    "check-cone": cmd_check_cone,
    "solve": cmd_solve,
    "probe": cmd_probe,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen-cyclic":
            return cmd_gen_cyclic(args)
        if args.command == "selftest":
            return cmd_selftest(args)
        cfg = load_config(args.config)
        if args.dump_config:
            print(cfg.to_text(), end="")
            return EXIT_OK
        return _COMMANDS[args.command](cfg, args)
    except (ConfigError, ExprSyntaxError, ExprDomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
