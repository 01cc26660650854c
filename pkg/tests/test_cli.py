import io
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from vsystem import __version__, cli
from vsystem.cli import TRAJECTORY_COLUMNS
from vsystem.config import Settings
from vsystem.services import figures, sweep
from vsystem.utils.tables import read_csv

ROOT = Path(__file__).resolve().parents[1]


def run_cli(*args, env=None):
    return subprocess.run(
        [sys.executable, "-m", "vsystem", *args],
        cwd=ROOT,
        env={**os.environ, **(env or {})},
        capture_output=True,
        text=True,
        timeout=600,
    )


def run_csv(*args):
    result = run_cli(*args)
    assert result.returncode == 0, result.stderr
    return read_csv(io.StringIO(result.stdout))


def test_version():
    result = run_cli("--version")
    assert result.returncode == 0
    assert __version__ in result.stdout


def test_simulate_exact():
    metadata, columns, rows = run_csv(
        "simulate", "--delta", "10", "--p", "1", "--nbar", "1000", "--points", "8"
    )
    assert columns == list(TRAJECTORY_COLUMNS)
    assert metadata["tool"] == "vsystem"
    assert metadata["command"] == "simulate"
    assert metadata["method"] == "exact"
    assert metadata["positivity_violations"] == "0"
    assert metadata["run_id"]
    assert rows[0][1:] == pytest.approx([0.0, 0.0, 1.0, 0.0, 0.0], abs=1e-12)
    assert rows[-1][1] == pytest.approx(1000.0 / 3001.0, abs=1e-4)


def test_simulate_analytic_auto_reports_form():
    metadata, _, rows = run_csv(
        "simulate", "--delta", "0.1", "--p", "0.9", "--nbar", "1000", "--points", "8",
        "--method", "analytic-auto",
    )
    assert metadata["form"] == "analytic_small_delta"
    assert metadata["branch"] == "subcritical"
    assert rows[-1][1] == pytest.approx(1.0 / 3.0, abs=5e-3)


def test_simulate_without_alignment_has_no_coherence():
    _, _, rows = run_csv("simulate", "--delta", "1", "--p", "0", "--nbar", "2", "--points", "8")
    assert all(abs(row[4]) < 1e-12 and abs(row[5]) < 1e-12 for row in rows)


def test_simulate_json_output(tmp_path):
    target = tmp_path / "out" / "trajectory.json"
    result = run_cli(
        "simulate", "--delta", "10", "--p", "0.9", "--nbar", "1000", "--points", "8",
        "--method", "stepped", "--format", "json", "--out", str(target),
    )
    assert result.returncode == 0, result.stderr
    payload = json.loads(target.read_text())
    assert payload["columns"] == list(TRAJECTORY_COLUMNS)
    assert payload["metadata"]["method"] == "stepped"
    assert payload["rows"][0][0] == 0.0


def test_analytic_branch_in_wrong_regime_fails():
    result = run_cli(
        "simulate", "--delta", "1000", "--p", "1", "--nbar", "100", "--method", "analytic-supercritical"
    )
    assert result.returncode == 3
    assert "underdamped" in result.stderr


def test_invalid_parameters_exit_with_usage_code():
    result = run_cli("classify", "--delta", "1", "--p", "2", "--nbar", "1")
    assert result.returncode == 2
    assert "p=2.0" in result.stderr


def test_classify_json():
    result = run_cli("classify", "--delta", "10", "--p", "1", "--nbar", "1000", "--json")
    assert result.returncode == 0, result.stderr
    payload = json.loads(result.stdout)
    assert payload["columns"] == ["regime", "discriminant", "delta_over_nbar_gamma", "slope_f"]
    regime, discriminant, ratio, slope = payload["rows"][0]
    assert regime == "overdamped"
    assert discriminant < 0
    assert ratio == pytest.approx(0.01)
    assert slope == pytest.approx(0.59, abs=5e-3)
    assert payload["metadata"]["p"] == 1.0


def test_spectrum_methods_agree():
    _, _, cardano = run_csv("spectrum", "--delta", "10", "--p", "0.95", "--nbar", "1000")
    _, _, numeric = run_csv("spectrum", "--delta", "10", "--p", "0.95", "--nbar", "1000", "--method", "numeric")
    assert sorted(row[3] for row in cardano) == pytest.approx(sorted(row[3] for row in numeric), rel=1e-8)


def test_spectrum_expansion_outside_window():
    args = ("spectrum", "--delta", "10", "--p", "0.5", "--nbar", "1000", "--method", "expansion")
    assert run_cli(*args).returncode == 3
    assert run_cli(*args, "--force").returncode == 0


def test_lifetime():
    _, columns, rows = run_csv("lifetime", "--delta", "10", "--p", "1", "--nbar", "1000")
    record = dict(zip(columns, rows[0]))
    assert record["branch"] == "supercritical"
    assert record["tau_formula"] == pytest.approx(13.4)
    assert record["ratio"] == pytest.approx(670.0)


def test_coeffs():
    _, columns, rows = run_csv("coeffs", "--p", "1")
    record = dict(zip(columns, rows[0]))
    assert record["T1"] == pytest.approx(-4.0)
    assert record["C2"] == pytest.approx(1.0)
    _, _, grid_rows = run_csv("coeffs", "--p-grid", "0.5:1:3")
    assert [row[0] for row in grid_rows] == [0.5, 0.75, 1.0]
    assert run_cli("coeffs", "--p", "0.05").returncode == 3


def test_scan():
    metadata, columns, rows = run_csv(
        "scan", "--quantity", "regime", "--axis1", "nbar:10:1000:3:log",
        "--axis2", "delta_over_gamma:1:10000:5:log", "--fixed", "p=1", "--workers", "1",
    )
    assert columns == ["nbar", "delta_over_gamma", "regime", "error"]
    assert len(rows) == 15
    assert metadata["quantity"] == "regime"
    assert {row[2] for row in rows} <= {-1.0, 0.0, 1.0}


@pytest.mark.parametrize(
    "axis",
    ["nbar:10:1000", "nbar:ten:1000:3", "nbar:10:1000:1", "nbar:0:1000:3:log"],
)
def test_scan_rejects_bad_axes(axis):
    result = run_cli(
        "scan", "--quantity", "regime", "--axis1", axis,
        "--axis2", "delta_over_gamma:1:10:3", "--fixed", "p=1",
    )
    assert result.returncode == 2


def test_zterms_reports_crossing():
    metadata, columns, rows = run_csv("zterms", "--p-grid", "0.2:1:81")
    assert columns == ["p", "j", "k", "magnitude", "error"]
    assert len(rows) == 81 * 9
    assert 0.98 < float(metadata["j2_crossing_low"]) < float(metadata["j2_crossing_high"]) <= 1.0


def test_reproduce_slope_figure(tmp_path):
    result = run_cli("reproduce-fig", "--fig", "4a", "--out-dir", str(tmp_path))
    assert result.returncode == 0, result.stderr
    written = result.stdout.split()
    assert [Path(path).name for path in written] == ["fig4a.csv", "fig4a.json"]
    with open(written[0], encoding="utf-8") as stream:
        metadata, columns, rows = read_csv(stream)
    assert metadata["figure"] == "4a"
    assert columns == ["p", "f"]
    assert len(rows) == 101
    assert rows[-1][1] == pytest.approx(0.59, abs=5e-3)


def test_reproduce_trajectory_figure(tmp_path):
    result = run_cli("reproduce-fig", "--fig", "9", "--out-dir", str(tmp_path))
    assert result.returncode == 0, result.stderr
    csvs = sorted(path.name for path in tmp_path.glob("*.csv"))
    assert csvs == [f"fig9_{name}.csv" for name in "abcdef"]
    with (tmp_path / "fig9_a.csv").open(encoding="utf-8") as stream:
        metadata, columns, rows = read_csv(stream)
    assert columns == ["t", "exact", "analytic"]
    assert metadata["branch"] == "supercritical"
    assert max(abs(exact - closed) for _, exact, closed in rows) < 0.01


def test_unknown_figure_is_a_usage_error():
    assert run_cli("reproduce-fig", "--fig", "11").returncode == 2


HEADER_KEYS = ("tool", "version", "gamma", "delta", "p", "nbar", "method")


@pytest.mark.parametrize(
    "args",
    [
        ("simulate", "--delta", "10", "--p", "1", "--nbar", "1000", "--points", "8"),
        ("classify", "--delta", "10", "--p", "1", "--nbar", "1000"),
        ("spectrum", "--delta", "10", "--p", "1", "--nbar", "1000"),
        ("lifetime", "--delta", "10", "--p", "1", "--nbar", "1000"),
        ("coeffs", "--p", "1"),
        ("zterms", "--p-grid", "0.9:1:3"),
        ("scan", "--quantity", "regime", "--axis1", "nbar:10:1000:3:log",
         "--axis2", "delta_over_gamma:1:100:3:log", "--p", "1", "--workers", "1"),
    ],
)
def test_every_output_carries_parameter_header(args):
    metadata, _, _ = run_csv(*args)
    for key in HEADER_KEYS:
        assert metadata.get(key), key
    assert metadata["version"] == __version__


def test_header_values():
    metadata, _, _ = run_csv("coeffs", "--p", "1")
    assert (metadata["p"], metadata["method"]) == ("1.0", "cofactors")
    metadata, _, _ = run_csv("zterms", "--p-grid", "0.9:1:3", "--nbar", "500")
    assert (metadata["gamma"], metadata["nbar"], metadata["p"]) == ("1.0", "500.0", "0.9:1:3")
    metadata, _, _ = run_csv(
        "scan", "--quantity", "regime", "--axis1", "nbar:10:1000:3:log",
        "--axis2", "delta_over_gamma:1:100:3:log", "--p", "1", "--workers", "1",
    )
    assert metadata["p"] == "1.0"
    assert metadata["nbar"] == "10.0:1000.0:3:log"


def test_scan_shorthands_fill_fixed_values():
    _, _, shorthand = run_csv(
        "scan", "--quantity", "regime", "--axis1", "nbar:10:1000:3:log",
        "--axis2", "delta_over_gamma:1:10000:5:log", "--p", "1", "--workers", "1",
    )
    _, _, fixed = run_csv(
        "scan", "--quantity", "regime", "--axis1", "nbar:10:1000:3:log",
        "--axis2", "delta_over_gamma:1:10000:5:log", "--fixed", "p=1", "--workers", "1",
    )
    assert shorthand == fixed
    _, _, by_delta = run_csv(
        "scan", "--quantity", "discriminant", "--axis1", "nbar:10:1000:3:log",
        "--axis2", "p:0:1:3", "--gamma", "2", "--delta", "20", "--workers", "1",
    )
    _, _, by_ratio = run_csv(
        "scan", "--quantity", "discriminant", "--axis1", "nbar:10:1000:3:log",
        "--axis2", "p:0:1:3", "--gamma", "2", "--fixed", "delta_over_gamma=10", "--workers", "1",
    )
    assert by_delta == by_ratio


@pytest.mark.parametrize(
    "extra",
    [("--p", "1", "--fixed", "p=1"), ("--p", "1", "--nbar", "5")],
)
def test_scan_rejects_conflicting_fixed_values(extra):
    result = run_cli(
        "scan", "--quantity", "regime", "--axis1", "nbar:10:1000:3:log",
        "--axis2", "delta_over_gamma:1:10:3", *extra,
    )
    assert result.returncode == 2


@pytest.mark.parametrize(
    "args",
    [
        ("zterms", "--nbar", "0"),
        ("zterms", "--nbar", "-5"),
        ("scan", "--quantity", "regime", "--axis1", "nbar:10:1000:3:log",
         "--axis2", "delta_over_gamma:1:10:3", "--p", "1", "--workers", "-1"),
        ("reproduce-fig", "--fig", "4a", "--workers", "-1"),
    ],
)
def test_invalid_inputs_exit_with_usage_code(args):
    result = run_cli(*args)
    assert result.returncode == 2, result.stderr
    assert "Traceback" not in result.stderr


def test_unwritable_output_is_a_usage_error(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory")
    result = run_cli("classify", "--delta", "1", "--p", "1", "--nbar", "1", "--out", str(blocker / "x.csv"))
    assert result.returncode == 2
    assert "Traceback" not in result.stderr
    result = run_cli("reproduce-fig", "--fig", "4a", "--out-dir", str(blocker / "figures"))
    assert result.returncode == 2
    assert "Traceback" not in result.stderr


def test_invalid_environment_is_a_usage_error():
    result = run_cli("classify", "--delta", "1", "--p", "1", "--nbar", "1", env={"VSYSTEM_WORKERS": "-1"})
    assert result.returncode == 2
    assert "VSYSTEM_" in result.stderr


def test_reproduce_uses_configured_workers(monkeypatch, tmp_path):
    seen = {}

    def record(figure, out_dir, workers=None, run_id=None):
        seen["workers"] = workers
        return []

    monkeypatch.setattr(sweep, "get_settings", lambda: Settings(_env_file=None, workers=3))
    monkeypatch.setattr(figures, "reproduce", record)
    monkeypatch.setattr(cli, "setup_logging", lambda level: None)
    assert cli.main(["reproduce-fig", "--fig", "4a", "--out-dir", str(tmp_path)]) == 0
    assert seen["workers"] == 3
