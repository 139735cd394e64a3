"""CLI: parsing, serialization round trips, subcommands, exit codes."""

import os

import numpy as np
import pytest

from cbfsyn.cli import (
    EXIT_DIVERGED,
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VERIFY_FAILED,
    format_polynomial,
    main,
    parse_polynomial,
    parse_problem,
    parse_result,
    spec_hash,
    write_result,
)
from cbfsyn.errors import ParseError
from cbfsyn.model import GLOBAL, LOCAL
from cbfsyn.synthesis import synthesize

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..")
PROBLEMS = os.path.join(ROOT, "problems")


def _read(name):
    return open(os.path.join(PROBLEMS, name)).read()


# -- polynomial text ---------------------------------------------------------------


def test_parse_polynomial_basic():
    p = parse_polynomial("1 * x1^2 - 1", 1)
    assert p((2.0,)) == pytest.approx(3.0)


def test_parse_polynomial_mixed_terms():
    p = parse_polynomial("2 * x1 x2 + 0.5 * x2^2 - 3 * x1 + 1", 2)
    assert p((1.0, 2.0)) == pytest.approx(4.0 + 2.0 - 3.0 + 1.0)


def test_parse_polynomial_scientific_notation():
    p = parse_polynomial("1e-3 * x1 - 2E-2", 1)
    assert p((1.0,)) == pytest.approx(1e-3 - 2e-2)


def test_parse_polynomial_tight_minus():
    p = parse_polynomial("1 * x1^2-1", 1)
    assert p((0.0,)) == pytest.approx(-1.0)


def test_parse_polynomial_rejects_bad_variable():
    with pytest.raises(ParseError):
        parse_polynomial("1 * x5", 2)
    with pytest.raises(ParseError):
        parse_polynomial("1 * y1", 2)
    with pytest.raises(ParseError):
        parse_polynomial("", 2)


def test_polynomial_format_round_trip():
    p = parse_polynomial("2 * x1 x2^3 - 0.125 * x2 + 7", 2)
    q = parse_polynomial(format_polynomial(p), 2)
    assert p.coeffs == q.coeffs


# -- problem files -----------------------------------------------------------------


def test_parse_problem_global():
    spec, backend = parse_problem(_read("example1.prob"))
    assert spec.mode == GLOBAL
    assert spec.partition.n_bar == 1
    assert backend == "clarabel"


def test_parse_problem_local_normalizes_halfspaces():
    spec, _ = parse_problem(_read("omni_local_l2.prob"))
    assert spec.mode == LOCAL
    H = spec.safe_set.halfspaces
    assert H.shape == (5, 4)
    # stored rows satisfy a'(x - c) + 1 = 0 exactly on the wall g'x = o
    # wall 1 of the arena: y = 3 with c = 0 => a = (0, -1/3, 0, 0)
    assert H[0] @ np.array([0.0, 3.0, 0.0, 0.0]) + 1.0 == pytest.approx(
        0.0, abs=1e-12)


def test_parse_problem_reports_line_numbers():
    text = "[system]\nA = 0 1 ; 0 zz\nB = 0 ; 1\n"
    with pytest.raises(ParseError) as err:
        parse_problem(text)
    assert err.value.line == 2


def test_parse_problem_rejects_unknown_section():
    with pytest.raises(ParseError):
        parse_problem("[system]\nA = 0\nB = 1\n[mystery]\nx = 1\n[mode]\nglobal\n")


def test_parse_problem_rejects_unknown_option():
    text = _read("example1.prob") + "\n[options]\nwarp_factor = 9\n"
    with pytest.raises(ParseError):
        parse_problem(text)


def test_parse_problem_rejects_center_outside_halfspace():
    text = """[system]
A = 0 1 ; 0 0
B = 0 ; 1
[mode]
local
[safe_set]
halfspace = 1 0 | -1
[initial_set]
poly = -1 * x1^2 - 1 * x2^2 + 0.1
[center]
c = 0 0
"""
    with pytest.raises(ParseError):
        parse_problem(text)


def test_spec_hash_is_content_addressed():
    a = _read("example1.prob")
    assert spec_hash(a) == spec_hash(a)
    assert spec_hash(a) != spec_hash(a + " ")


# -- result files ------------------------------------------------------------------


def test_write_parse_result_round_trip():
    text = _read("example1.prob")
    spec, _ = parse_problem(text)
    res = synthesize(spec)
    out = write_result(res, text)
    back, stored = parse_result(out)
    assert np.allclose(back.Omega, res.Omega)
    assert np.allclose(back.controller.K, res.controller.K)
    assert back.program_tag == res.program_tag
    assert back.multipliers.keys() == res.multipliers.keys()
    assert {c.name for c in stored} == {c.name for c in res.report.checks}
    # serialization is bitwise stable
    assert write_result(res, text) == out


def test_parse_result_requires_result_section():
    with pytest.raises(ParseError):
        parse_result(_read("example1.prob"))


def test_published_result_files_parse():
    for name in ("case1_published.result", "case2_published.result"):
        res, stored = parse_result(_read(name))
        assert res.program_tag == "published"
        assert res.Omega.shape[0] == res.cbf.n


# -- subcommands and exit codes ----------------------------------------------------


def _prob(name):
    return os.path.join(PROBLEMS, name)


def test_cmd_synth_ok(tmp_path):
    out = str(tmp_path / "e1.result")
    assert main(["synth", _prob("example1.prob"), "--out", out]) == EXIT_OK
    assert "[result]" in open(out).read()


def test_cmd_synth_infeasible():
    assert main(["synth", _prob("infeasible.prob")]) == EXIT_INFEASIBLE


def test_cmd_synth_missing_file():
    assert main(["synth", "/nonexistent.prob"]) == EXIT_USAGE


def test_cmd_synth_malformed(tmp_path):
    bad = tmp_path / "bad.prob"
    bad.write_text("[system]\nA = 0 1 ; 0 zz\nB = 0 ; 1\n")
    assert main(["synth", str(bad)]) == EXIT_USAGE


def test_cmd_verify_published_tolerances():
    c1 = _prob("case1_published.result")
    c2 = _prob("case2_published.result")
    assert main(["verify", c1, "--paper-tol"]) == EXIT_OK
    assert main(["verify", c2, "--paper-tol"]) == EXIT_OK
    # the rounded second certificate is indefinite at strict tolerance
    assert main(["verify", c2]) == EXIT_VERIFY_FAILED


def test_cmd_verify_tampered(tmp_path):
    text = _read("case1_published.result")
    out = []
    for line in text.splitlines():
        if line.startswith("Omega = "):
            rows = line[len("Omega = "):].split(";")
            rows = [" ".join(f"{float(v) * 0.5:.17g}" for v in r.split())
                    for r in rows]
            line = "Omega = " + " ; ".join(rows)
        out.append(line)
    bad = tmp_path / "tampered.result"
    bad.write_text("\n".join(out) + "\n")
    assert main(["verify", str(bad), "--paper-tol"]) == EXIT_VERIFY_FAILED


def test_cmd_simulate_and_divergence(tmp_path):
    c1 = _prob("case1_published.result")
    csv = str(tmp_path / "traj.csv")
    assert main(["simulate", c1, "--x0", "2 0", "--T", "1",
                 "--out", csv]) == EXIT_OK
    rows = open(csv).read().splitlines()
    assert rows[0].split(",") == ["t", "x1", "x2", "b", "u1"]
    assert len(rows) == 1002  # header + 1001 steps
    # the second benchmark's closed loop is unstable over long horizons
    assert main(["simulate", _prob("case2_published.result"),
                 "--x0", "2 0 0", "--T", "100"]) == EXIT_DIVERGED


def test_cmd_simulate_zero_horizon():
    c1 = _prob("case1_published.result")
    assert main(["simulate", c1, "--x0", "2 0", "--T", "0"]) == EXIT_OK


def test_cmd_scan_levelset(tmp_path):
    csv = str(tmp_path / "scan.csv")
    code = main(["scan", _prob("case1_published.result"), "--kind", "levelset",
                 "--min", "-2 -2", "--max", "2 2", "--res", "5 5",
                 "--out", csv])
    assert code == EXIT_OK
    rows = open(csv).read().splitlines()
    assert rows[0] == "x1,x2,value"
    assert len(rows) == 26


def test_cmd_scan_pathology(tmp_path):
    csv = str(tmp_path / "scan.csv")
    code = main(["scan", _prob("example1.prob"), "--kind", "pathology",
                 "--min", "-2 -2", "--max", "2 2", "--res", "9 9",
                 "--out", csv])
    assert code == EXIT_OK
    vals = [float(r.split(",")[2])
            for r in open(csv).read().splitlines()[1:]]
    assert max(vals) == 100.0  # capped blow-up region present


def test_cmd_scan_single_cell(tmp_path):
    csv = str(tmp_path / "one.csv")
    code = main(["scan", _prob("case1_published.result"),
                 "--min", "0 0", "--max", "0 0", "--res", "1 1",
                 "--out", csv])
    assert code == EXIT_OK
    assert len(open(csv).read().splitlines()) == 2


def test_cmd_scan_bad_slice():
    assert main(["scan", _prob("case1_published.result"),
                 "--axes", "1 2 3"]) == EXIT_USAGE


def test_usage_error_on_unknown_command():
    assert main(["frobnicate"]) == EXIT_USAGE
