import shutil
from pathlib import Path

import numpy as np
import pytest
from builders import manufactured_xi

from hetoda.cli import main
from hetoda.config import ConfigError, load_config, parse_config
from hetoda.grid import PeriodicGrid, read_hef1, write_hef1

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def cfgdir(tmp_path):
    for f in CONFIGS.iterdir():
        shutil.copy(f, tmp_path / f.name)
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def report_value(text, key):
    for line in text.splitlines():
        if line.startswith(key + ":"):
            return line.split(":", 1)[1].strip()
    raise KeyError(key)


# ---------------------------------------------------------------------------
# check-cone

def test_check_cone_cyclic(cfgdir, capsys):
    code, out, _ = run(capsys, "check-cone", cfgdir / "cyclic3.ini")
    assert code == 0
    lams = [line.split(": ")[1] for line in out.splitlines() if line.startswith("lambda[")]
    assert len(lams) == 3 and len(set(lams)) == 1
    assert "flat_subspace_dim: 0" in out


def test_check_cone_infeasible(cfgdir, capsys):
    code, out, _ = run(capsys, "check-cone", cfgdir / "infeasible.ini")
    assert code == 2
    assert "farkas_w: (-1, 1)" in out
    assert "gamma_exact: (1, -1)" in out


def test_check_cone_syntax_error(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[problem]\nr = 2\nn = 8\nmode = explicit\n[phi]\n1,2 = sin(\n")
    code, _, err = run(capsys, "check-cone", cfg)
    assert code == 1
    assert "position 4" in err


@pytest.mark.parametrize(
    "text, needle",
    [
        ("[problem]\nr = 2\n", "needs r and n"),
        ("[problem]\nr = 2\nn = 12\n", "power of two"),
        ("[problem]\nr = 1\nn = 8\n", "r must be"),
        ("[problem]\nr = 2\nn = 8\n[bogus]\n", "unknown section"),
        ("[problem]\nr = 2\nn = 8\n[solver]\ntol = abc\n", "tol"),
        ("[problem]\nr = 2\nn = 8\nmode = explicit\n[phi]\n1,1 = 1\n", "i == j"),
        ("[problem]\nr = 2\nn = 8\n[phi]\n7 = 1\n", "indices 1..2"),
        ("[problem]\nr = 2\nn = 8\n[a]\n1 = 1\n2 = 1\n", "not zero"),
        ("[problem]\nr = 2\nn = 8\n[k]\n1 = -1\n", "positive"),
        ("[problem]\nr = 2\nn = 8\n[phi]\n1 = @missing.hef1\n", "missing.hef1"),
        ("no section header\n", "syntax"),
    ],
)
def test_config_errors_exit_1(tmp_path, capsys, text, needle):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(text)
    code, _, err = run(capsys, "check-cone", cfg)
    assert code == 1
    assert needle in err


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run(capsys, "check-cone", tmp_path / "nope.ini")
    assert code == 1 and "cannot read" in err


# ---------------------------------------------------------------------------
# solve

def test_solve_cyclic(cfgdir, capsys):
    code, out, _ = run(capsys, "solve", cfgdir / "cyclic3.ini")
    assert code == 0
    report = (cfgdir / "out_cyclic3" / "solve_report.txt").read_text()
    assert report_value(report, "status") == "Converged"
    assert float(report_value(report, "residual_linf")) < 1e-10
    assert read_hef1(cfgdir / "out_cyclic3" / "solution.hef1").shape == (3, 32, 32)
    assert report_value((cfgdir / "out_cyclic3" / "verify_report.txt").read_text(), "verdict") == "FullCriticalPoint"


def test_solve_manufactured_against_bundled_solution(cfgdir, capsys):
    code, _, _ = run(capsys, "solve", cfgdir / "manufactured.ini", "--out", cfgdir / "m")
    assert code == 0
    xi = read_hef1(cfgdir / "m" / "solution.hef1")
    ref = read_hef1(cfgdir / "manufactured_xi.hef1")
    assert np.max(np.abs(xi - ref)) < 1e-8


def test_bundled_solution_matches_formula():
    ref = read_hef1(CONFIGS / "manufactured_xi.hef1")
    np.testing.assert_array_equal(ref, manufactured_xi(PeriodicGrid(64)))


def test_solve_infeasible(cfgdir, capsys):
    code, out, _ = run(capsys, "solve", cfgdir / "infeasible.ini")
    assert code == 3
    report = (cfgdir / "out_infeasible" / "solve_report.txt").read_text()
    assert report_value(report, "status") == "DivergenceDetected"
    assert report_value(report, "certificate.status") == "Infeasible"
    assert report_value(report, "certificate.farkas_w") == "(-1, 1)"


def test_solve_max_iterations(cfgdir, capsys):
    cfg = cfgdir / "positive.ini"
    cfg.write_text(cfg.read_text() + "\n[solver]\nmax_iter = 1\n")
    code, _, _ = run(capsys, "solve", cfg, "--out", cfgdir / "mi")
    assert code == 4


def test_solve_reports_are_byte_stable(cfgdir, capsys):
    run(capsys, "solve", cfgdir / "positive.ini", "--out", cfgdir / "r1")
    run(capsys, "solve", cfgdir / "positive.ini", "--out", cfgdir / "r2")
    for name in ("solve_report.txt", "verify_report.txt", "solution.hef1"):
        assert (cfgdir / "r1" / name).read_bytes() == (cfgdir / "r2" / name).read_bytes()


def test_solve_warm_start_from_initial(cfgdir, capsys):
    cfg = cfgdir / "manufactured.ini"
    cfg.write_text(cfg.read_text() + "\n[solver]\ninitial = manufactured_xi.hef1\n")
    code, _, _ = run(capsys, "solve", cfg, "--out", cfgdir / "w")
    assert code == 0
    assert int(report_value((cfgdir / "w" / "solve_report.txt").read_text(), "iterations")) <= 1


# ---------------------------------------------------------------------------
# probe

def test_probe_directions(cfgdir, capsys):
    cfg = cfgdir / "cyclic3.ini"
    cfg.write_text(cfg.read_text() + "\n[probe]\ndirection.1 = const:1,-1,0\n"
                   "direction.2 = expr:sin(2*pi*x)|-sin(2*pi*x)|0\nt_stop = 2\nt_count = 5\n")
    code, out, _ = run(capsys, "probe", cfg)
    assert code == 0
    assert "direction.1: const:1,-1,0 -> DIVERGES_UP" in out
    assert "direction.2: expr:sin(2*pi*x)|-sin(2*pi*x)|0 -> DIVERGES_UP" in out
    lines = (cfgdir / "out_cyclic3" / "probe_1.csv").read_text().splitlines()
    assert len(lines) == 6


def test_probe_farkas_and_flat(cfgdir, capsys):
    code, out, _ = run(capsys, "probe", cfgdir / "infeasible.ini")
    assert code == 0 and "farkas -> DIVERGES_DOWN" in out
    code, out, _ = run(capsys, "probe", cfgdir / "flat.ini")
    assert code == 0 and "const:1,1,-2 -> BOUNDED_FLAT" in out


@pytest.mark.parametrize("direction", ["const:1,1", "const:1,1,1", "expr:x|y", "sideways", "farkas"])
def test_probe_bad_directions(cfgdir, capsys, direction):
    cfg = cfgdir / "cyclic3.ini"
    cfg.write_text(cfg.read_text() + f"\n[probe]\ndirection.1 = {direction}\n")
    code, _, err = run(capsys, "probe", cfg)
    assert code == 1 and err.startswith("error:")


# ---------------------------------------------------------------------------
# verify

def test_verify_exit_codes(cfgdir, capsys):
    run(capsys, "solve", cfgdir / "cyclic3.ini")
    code, out, _ = run(capsys, "verify", cfgdir / "cyclic3.ini", cfgdir / "out_cyclic3" / "solution.hef1")
    assert code == 0 and out.startswith("verdict: FullCriticalPoint")

    run(capsys, "solve", cfgdir / "two_entry.ini")
    heat = cfgdir / "heat.csv"
    code, out, _ = run(capsys, "verify", cfgdir / "two_entry.ini", cfgdir / "out_two_entry" / "solution.hef1",
                       "--heatmap", heat)
    assert code == 5 and out.startswith("verdict: DiagonalOnly")
    assert np.loadtxt(heat, delimiter=",").shape == (32, 32)

    wrong = cfgdir / "wrong.hef1"
    write_hef1(wrong, np.zeros((2, 32, 32)))
    code, _, err = run(capsys, "verify", cfgdir / "cyclic3.ini", wrong)
    assert code == 1 and "shape" in err
    code, _, _ = run(capsys, "verify", cfgdir / "cyclic3.ini", cfgdir / "absent.hef1")
    assert code == 1


# ---------------------------------------------------------------------------
# config round trip, gen-cyclic, selftest

@pytest.mark.parametrize("name", ["cyclic3", "manufactured", "positive", "infeasible", "two_entry", "flat"])
def test_dump_config_round_trip(cfgdir, capsys, name):
    code, dumped, _ = run(capsys, "check-cone", cfgdir / f"{name}.ini", "--dump-config")
    assert code == 0
    original = load_config(cfgdir / f"{name}.ini")
    again = parse_config(dumped, cfgdir)
    assert again == original
    assert again.to_text() == dumped


def test_file_sources_and_imaginary_parts(cfgdir):
    grid = PeriodicGrid(8)
    x, _ = grid.coords()
    write_hef1(cfgdir / "phi.hef1", np.stack([1 + x, 2 + x]))
    cfg = parse_config(
        "[problem]\nr = 2\nn = 8\nmode = explicit\n[phi]\n1,2 = @phi.hef1#1\n1,2.im = 0.5\n[a]\n1 = cos(2*pi*y)\n",
        cfgdir,
    )
    p = cfg.build_problem()
    np.testing.assert_array_equal(p.phi((1, 2)), (2 + x) + 0.5j)
    np.testing.assert_allclose(p.a[1], -p.a[0])
    with pytest.raises(ConfigError):
        parse_config("[problem]\nr = 2\nn = 8\n[phi]\n1 = @phi.hef1#5\n", cfgdir).build_problem()


def test_gen_cyclic(tmp_path, capsys):
    out = tmp_path / "gen.ini"
    code, _, _ = run(capsys, "gen-cyclic", "--r", "3", "--n", "16", "--phi", "1", "--phi", "2", "--phi", "x+1",
                     "-o", out)
    assert code == 0
    cfg = load_config(out)
    assert cfg.r == 3 and cfg.n == 16 and cfg.phi == {"1": "1", "2": "2", "3": "x+1"}
    code, stdout, _ = run(capsys, "gen-cyclic", "--r", "2")
    assert code == 0 and stdout.startswith("[problem]\nr = 2\nn = 64\nmode = cyclic\n")
    code, _, err = run(capsys, "gen-cyclic", "--r", "2", "--phi", "sin(")
    assert code == 1 and "position 4" in err


def test_selftest(capsys):
    code, out, _ = run(capsys, "selftest", "--seed", "5")
    assert code == 0
    assert out.count("PASS") == len(out.splitlines())
