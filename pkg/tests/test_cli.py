"""Command-line interface: exit codes, deterministic reports, file outputs."""

import json
import re
import subprocess

import numpy as np
import pytest

from gberwald import BUILTINS, averaged_metric, builtin_family, circle_quadrature
from gberwald.cli import main

FAST = ["--pool", "96", "--quad-nodes", "256"]


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# ---------------------------------------------------------------------------
# determinism

def test_same_invocation_is_byte_identical(capsys):
    argv = ["decide", "--metric", "frame_randers", "--grid", "0:1:2,0:1:2", *FAST]
    code1, out1, _ = run_cli(capsys, *argv)
    code2, out2, _ = run_cli(capsys, *argv)
    assert code1 == code2 == 0
    assert out1 == out2
    assert out1.encode("utf-8") == out2.encode("utf-8")


def test_seed_changes_noise_but_not_verdicts(capsys):
    argv = ["decide", "--metric", "randers_sine", "--grid", "0:1:2,0:1:2", *FAST]
    _, out0, _ = run_cli(capsys, *argv, "--seed", "0")
    _, out7, _ = run_cli(capsys, *argv, "--seed", "7")
    a, b = json.loads(out0), json.loads(out7)
    assert a["global_verdict"] == b["global_verdict"] == "not_generalized_berwald"
    assert [p["verdict"] for p in a["points"]] == [p["verdict"] for p in b["points"]]


# ---------------------------------------------------------------------------
# exit codes

def test_exit_code_zero_for_positive_verdicts(capsys):
    code, out, _ = run_cli(
        capsys, "decide", "--metric", "euclidean2", "--grid", "0:1:2,0:1:2", *FAST
    )
    assert code == 0
    assert json.loads(out)["global_verdict"] == "riemannian"


def test_exit_code_one_for_failing_metric(capsys):
    code, out, _ = run_cli(
        capsys, "decide", "--metric", "randers_sine", "--grid", "0:1:2,0:1:2", *FAST
    )
    assert code == 1
    payload = json.loads(out)
    assert payload["global_verdict"] == "not_generalized_berwald"
    for point in payload["points"]:
        assert point["stacked_initial"] > 1e-3
        assert point["stacked_refined"] > 1e-3
        assert point["reason"]


def test_exit_code_two_when_thresholds_make_everything_inconclusive(capsys):
    code, out, _ = run_cli(
        capsys, "decide", "--metric", "randers_sine", "--grid", "0:1:2,0:1:2",
        *FAST, "--trigger", "1000000",
    )
    assert code == 2
    assert json.loads(out)["global_verdict"] == "inconclusive"


@pytest.mark.parametrize(
    "argv,fragment",
    [
        (["decide", "--metric", "nope", "--grid", "0:1:2,0:1:2"], "neither a built-in"),
        (["decide", "--metric", "euclidean2", "--grid", "0:1:2"], "grid has 1 axes"),
        (["decide", "--metric", "euclidean2", "--grid", "0:1:2,0:1:1"], "at least 2 points"),
        (["decide", "--metric", "euclidean2", "--grid", "0:1:2,junk"], "lo:hi:count"),
        (["decide", "--metric", "euclidean2", "--grid", "0:1:2,0:1:2", "--pool", "4"],
         "--pool must be at least 8"),
        (["decide", "--metric", "euclidean2", "--grid", "0:1:2,0:1:2", "--trigger", "-1"],
         "must be positive"),
        (["torsion", "--metric", "euclidean2", "--point", "0.5"], "needs 2 coordinates"),
        (["torsion", "--metric", "euclidean2", "--point", "a,b"], "comma-separated numbers"),
        (["validate", "--metric", "euclidean2", "--path", "0,0", "--v0", "1,0"],
         "at least two"),
    ],
)
def test_exit_code_three_for_bad_input(capsys, argv, fragment):
    code, _, err = run_cli(capsys, *argv)
    assert code == 3
    assert fragment in err


def test_exit_code_three_for_usage_errors(capsys):
    code, _, err = run_cli(capsys)
    assert code == 3
    code, _, err = run_cli(capsys, "decide", "--metric", "euclidean2")
    assert code == 3
    assert "--grid" in err


def test_malformed_metric_file_reports_position(capsys, tmp_path):
    bad = tmp_path / "bad.metric"
    bad.write_text(
        "family = riemannian\ndim = 2\na = [[1, 0],\n     [0, 1 +]]\n", encoding="utf-8"
    )
    code, _, err = run_cli(
        capsys, "decide", "--metric", str(bad), "--grid", "0:1:2,0:1:2"
    )
    assert code == 3
    assert "line 4, column 13" in err


# ---------------------------------------------------------------------------
# payloads

def test_decide_payload_shape(capsys):
    code, out, _ = run_cli(
        capsys, "decide", "--metric", "frame_randers", "--grid", "0:1:2,0:1:2", *FAST
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["schema"] == 1
    assert payload["tool"] == "gberwald"
    assert payload["command"] == "decide"
    assert payload["config"]["metric_text"] == BUILTINS["frame_randers"]
    assert payload["config"]["pool_sizes"]["equispaced"] == 96
    assert payload["config"]["grid"] == {"bounds": [[0.0, 1.0], [0.0, 1.0]], "shape": [2, 2]}
    assert payload["global_verdict"] == "generalized_berwald"
    assert payload["verdict_counts"] == {"generalized_berwald": 4}
    assert payload["route_counts"] == {"chain": 4}
    assert payload["continuity"] is not None
    assert len(payload["points"]) == 4
    first = payload["points"][0]
    for key in (
        "index", "point", "verdict", "route", "torsion_chart", "torsion_frame",
        "residual_max", "agreement", "chain_length", "status", "reason",
    ):
        assert key in first
    np.testing.assert_allclose(first["torsion_chart"], [0.0, -1.0], rtol=0, atol=1e-6)


def test_float_rendering_uses_17_significant_digits(capsys):
    code, out, _ = run_cli(
        capsys, "average", "--metric", "euclidean2", "--grid", "0:1:2,0:1:2",
        "--quad-nodes", "256",
    )
    assert code == 0
    match = re.search(r"6\.28318530717\d{5}", out)
    assert match is not None
    assert float(match.group()) == pytest.approx(2 * np.pi, abs=1e-12)


def test_average_payload_matches_library(capsys):
    code, out, _ = run_cli(
        capsys, "average", "--metric", "riem_diag41", "--grid", "0:1:2,0:1:2",
        "--quad-nodes", "256",
    )
    assert code == 0
    payload = json.loads(out)
    family = builtin_family("riem_diag41")
    quad = circle_quadrature(256)
    for row in payload["points"]:
        want = averaged_metric(family, np.asarray(row["point"]), quad)
        np.testing.assert_allclose(np.asarray(row["gamma"]), want, rtol=0, atol=1e-12)
        assert np.asarray(row["christoffel"]).shape == (2, 2, 2)


def test_torsion_payload_has_chain_trace(capsys):
    code, out, _ = run_cli(
        capsys, "torsion", "--metric", "frame_randers", "--point", "0.5,0.25", *FAST
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["command"] == "torsion"
    assert payload["route"] == "chain"
    assert payload["status"] == "converged"
    assert payload["converged"] is True
    assert payload["chain_length"] == 1
    assert len(payload["chain"]) == 1
    step = payload["chain"][0]
    assert step["step"] == 1
    assert len(step["direction"]) == 2
    assert step["torsion_norm"] == payload["torsion_norm"]
    np.testing.assert_allclose(payload["torsion_chart"], [0.0, -1.0], rtol=0, atol=1e-6)
    assert payload["residual_validation"] < 1e-7


def test_validate_payload_reports_drift(capsys):
    code, out, _ = run_cli(
        capsys, "validate", "--metric", "frame_randers",
        "--path", "0.5,0;0.5,0.1", "--v0", "0.7,0.4",
        "--steps", "100", "--quad-nodes", "256",
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["command"] == "validate"
    assert payload["field"] == "extremal"
    assert payload["steps_per_unit"] == 100
    assert payload["drift"] < 1e-6
    assert abs(payload["F_end"] - payload["F_start"]) <= payload["drift"]
    assert len(payload["vector_end"]) == 2

    code, out, _ = run_cli(
        capsys, "validate", "--metric", "frame_randers",
        "--path", "0.5,0;0.5,0.1", "--v0", "0.7,0.4",
        "--steps", "100", "--quad-nodes", "256", "--field", "levi-civita",
    )
    assert code == 0
    lc = json.loads(out)
    assert lc["field"] == "levi-civita"
    assert lc["drift"] > 1e-4


# ---------------------------------------------------------------------------
# file outputs

def test_out_file_matches_stdout(capsys, tmp_path):
    argv = ["decide", "--metric", "euclidean2", "--grid", "0:1:2,0:1:2", *FAST]
    _, stdout_text, _ = run_cli(capsys, *argv)
    out_path = tmp_path / "report.json"
    code, piped, _ = run_cli(capsys, *argv, "--out", str(out_path))
    assert code == 0
    assert piped == ""
    assert out_path.read_text(encoding="utf-8") == stdout_text


def test_csv_torsion_field(capsys, tmp_path):
    csv_path = tmp_path / "field.csv"
    code, _, _ = run_cli(
        capsys, "decide", "--metric", "frame_randers", "--grid", "0:1:2,0:1:2",
        *FAST, "--csv", str(csv_path),
    )
    assert code == 0
    lines = csv_path.read_text(encoding="utf-8").strip().splitlines()
    assert lines[0] == "u1,u2,T1_12,T2_12,residual"
    assert len(lines) == 5
    for line in lines[1:]:
        u1, u2, t1, t2, residual = (float(tok) for tok in line.split(","))
        assert (u1, u2) in {(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)}
        assert abs(t1) < 1e-6
        assert t2 == pytest.approx(-1.0, abs=1e-6)
        assert residual < 1e-7


# ---------------------------------------------------------------------------
# installed entry point

def test_console_script_runs():
    proc = subprocess.run(
        ["gberwald", "decide", "--metric", "euclidean2", "--grid", "0:1:2,0:1:2",
         "--pool", "96", "--quad-nodes", "256"],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["global_verdict"] == "riemannian"


def test_module_help_exits_zero(capsys):
    code, out, _ = run_cli(capsys, "--help")
    assert code == 0
    assert "decide" in out and "average" in out and "validate" in out
