import json
import math
from fractions import Fraction
from pathlib import Path

import pytest

from pdeseries import cli
from pdeseries.specfile import BUNDLED

FIXTURES = Path(__file__).parent / "fixtures"
INTEGRABLE = [b for b in BUNDLED if b not in ("noncommuting", "mixed_nonintegrable")]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--output", "json")
    return code, json.loads(out), out


# --- check ---------------------------------------------------------------------


def test_check_exp_x1x2(capsys):
    code, out, _ = run(capsys, "check", "bundled:exp_x1x2")
    assert code == 0
    assert "integrable to order 9" in out


def test_check_noncommuting(capsys):
    code, report, _ = run_json(capsys, "check", "bundled:noncommuting")
    assert code == 2
    w = report["integrability"]["witness"]
    assert (w["t"], w["s"], w["u"], w["v"], w["value"]) == (1, 1, 1, 2, "1")


def test_check_zero(capsys):
    code, out, _ = run(capsys, "check", "bundled:zero")
    assert code == 0


def test_check_mixed_nonlinear(capsys):
    code, report, _ = run_json(capsys, "check", "bundled:mixed_nonintegrable")
    assert code == 2
    w = report["integrability"]["witness"]
    assert (w["t"], w["s"], w["u"], w["v"], w["value"]) == ([1], [2], 1, 2, "-1")


# --- usage and parse errors ------------------------------------------------------


def test_parse_error_reports_position(capsys):
    code, _, err = run(capsys, "check", str(FIXTURES / "bad_syntax.json"))
    assert code == 1
    assert "line 5, column 3" in err


def test_duplicate_rejected(capsys):
    code, _, err = run(capsys, "check", str(FIXTURES / "duplicate.json"))
    assert code == 1 and "duplicate" in err


def test_unknown_command_and_missing_file(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate", "bundled:zero"])
    assert exc.value.code == 1
    code, _, err = run(capsys, "check", str(FIXTURES / "missing.json"))
    assert code == 1 and "cannot read" in err


def test_bad_polynomial_in_spec(tmp_path, capsys):
    spec = {"kind": "linear", "n": 1, "k": 1, "order": 3, "equations": [{"r": 1, "s": 1, "u": 1, "f": "x1 +* 2"}]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(spec))
    code, _, err = run(capsys, "check", str(path))
    assert code == 1 and "position" in err


def test_index_out_of_range(tmp_path, capsys):
    spec = {"kind": "linear", "n": 1, "k": 1, "order": 3, "equations": [{"r": 2, "s": 1, "u": 1, "f": "1"}]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(spec))
    code, _, err = run(capsys, "check", str(path))
    assert code == 1 and "out of range" in err


def test_truncation_warning(tmp_path, capsys):
    spec = {"kind": "linear", "n": 1, "k": 1, "order": 2, "equations": [{"r": 1, "s": 1, "u": 1, "f": "x1^5"}]}
    path = tmp_path / "t.json"
    path.write_text(json.dumps(spec))
    code, report, _ = run_json(capsys, "check", str(path))
    assert code == 0 and report["warnings"]


def test_solve_needs_initial_values(tmp_path, capsys):
    spec = {"kind": "linear", "n": 1, "k": 1, "order": 2, "equations": []}
    path = tmp_path / "noc.json"
    path.write_text(json.dumps(spec))
    code, _, err = run(capsys, "solve", str(path))
    assert code == 1 and "--C" in err
    code, _, _ = run(capsys, "solve", str(path), "--C", "1,2")
    assert code == 1


# --- solve and eval ------------------------------------------------------------------


def test_solve_riccati(capsys):
    code, report, _ = run_json(capsys, "solve", "bundled:riccati", "--C", "1")
    assert code == 0
    values = [c["value"] for c in report["solution"]["coefficients"]]
    assert values == [str((-1) ** w) for w in range(13)]


def test_solve_zero(capsys):
    code, report, _ = run_json(capsys, "solve", "bundled:zero")
    coeffs = report["solution"]["coefficients"]
    assert [(c["unknown"], c["multi_index"], c["value"]) for c in coeffs] == [(1, [0, 0], "1"), (2, [0, 0], "-2/3")]


def test_solve_exp_x1x2_roundtrip(capsys):
    code, report, _ = run_json(capsys, "solve", "bundled:exp_x1x2")
    assert code == 0
    table = {tuple(c["multi_index"]): Fraction(c["value"]) for c in report["solution"]["coefficients"]}
    for m in range(6):
        assert table[(m, m)] == Fraction((-1) ** m, math.factorial(m))
    assert len(table) == 6


def test_solve_refuses_curved(capsys):
    code, report, _ = run_json(capsys, "solve", "bundled:noncommuting")
    assert code == 2 and "solution" not in report


def test_coefficient_ordering(capsys):
    _, report, _ = run_json(capsys, "solve", "bundled:zero", "--C", "1,1", "--order", "3")
    keys = [(sum(c["multi_index"]), c["multi_index"], c["unknown"]) for c in report["solution"]["coefficients"]]
    assert keys == sorted(keys)


def test_eval_origin_prints_C(capsys):
    code, report, _ = run_json(capsys, "eval", "bundled:zero", "--x", "0,0")
    assert report["evaluation"]["values"] == ["1", "-2/3"]


def test_eval_riccati_float(capsys):
    code, report, _ = run_json(capsys, "eval", "bundled:riccati", "--C", "1/2", "--x", "0.1", "--field", "float")
    assert code == 0
    assert abs(report["evaluation"]["values"][0] - 10 / 21) < 1e-9
    assert report["cross_validation"]["discrepancy"][0] < 1e-6


def test_eval_exp_x1x2(capsys):
    code, report, _ = run_json(capsys, "eval", "bundled:exp_x1x2", "--x", "0.2,0.3", "--field", "float")
    assert abs(report["evaluation"]["values"][0] - math.exp(-0.06)) < 1e-9


def test_eval_needs_point(capsys):
    code, _, err = run(capsys, "eval", "bundled:exp_x1x2")
    assert code == 1 and "--x" in err


# --- verify ---------------------------------------------------------------------------


@pytest.mark.parametrize("name", INTEGRABLE)
def test_verify_bundled(name, capsys):
    code, report, _ = run_json(capsys, "verify", f"bundled:{name}", "--order", "6", "--samples", "30")
    assert code == 0, report
    assert report["passed"] and all(c["passed"] for c in report["checks"])


def test_verify_corrupted_fixture(capsys):
    code, report, _ = run_json(capsys, "verify", str(FIXTURES / "corrupted_exp_x1x2.json"))
    residual = next(c for c in report["checks"] if c["name"] == "residual")
    assert not residual["passed"]
    assert residual["failure"]["equation"] == {"r": 1, "u": 2}
    assert code == 2


def test_verify_window_escape(capsys):
    code, _, err = run(capsys, "verify", "bundled:riccati", "--window", "0..3")
    assert code == 1
    assert "(4,)" in err


def test_verify_failed_check_exit_code(monkeypatch, capsys):
    def broken(*args, **kwargs):
        return {"passed": False, "checked_degree": 0}

    monkeypatch.setattr(cli, "_residual_out", broken)
    code, _, _ = run(capsys, "verify", "bundled:exponential")
    assert code == 3


# --- output contract -----------------------------------------------------------------------


def has_float(node) -> bool:
    if isinstance(node, float):
        return True
    if isinstance(node, dict):
        return any(has_float(v) for v in node.values())
    if isinstance(node, list):
        return any(has_float(v) for v in node)
    return False


@pytest.mark.parametrize("command", ["check", "solve", "verify"])
@pytest.mark.parametrize("name", BUNDLED)
def test_rational_output_has_no_floats(command, name, capsys):
    _, report, _ = run_json(capsys, command, f"bundled:{name}", "--order", "5", "--samples", "10")
    assert not has_float(report)


def test_rational_output_with_tol_has_no_floats(capsys):
    _, report, _ = run_json(capsys, "check", "bundled:zero", "--tol", "1e-9")
    assert not has_float(report)


def test_float_output_is_numeric(capsys):
    _, report, _ = run_json(capsys, "solve", "bundled:exponential", "--field", "float", "--order", "3")
    assert has_float(report)


def test_json_is_deterministic(capsys):
    first = run_json(capsys, "solve", "bundled:twin_riccati")[2]
    second = run_json(capsys, "solve", "bundled:twin_riccati")[2]
    assert first == second
    assert json.loads(first)["schema_version"] == cli.REPORT_SCHEMA_VERSION


def test_human_output_has_timing(capsys):
    _, out, _ = run(capsys, "check", "bundled:zero")
    assert "time:" in out


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "pdeseries", "check", "bundled:exponential"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "integrable" in proc.stdout
