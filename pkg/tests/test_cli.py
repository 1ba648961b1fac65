"""End-to-end command-line behavior: exit codes, files written, determinism."""
import csv
import subprocess
import sys

import numpy as np
import pytest

from mixipw import EmConfig
from mixipw.cli import main
from mixipw.data import VersionStructure
from mixipw.estimators import build_report
from mixipw.ingest import ingest, preprocess, read_roles
from mixipw.pipeline import fit_pipeline
from mixipw.reports import load_report


def make_table(tmp_path, n=120, seed=7):
    """Write a two-arm CSV with numeric covariates plus a roles file."""
    rng = np.random.default_rng(seed)
    x1 = rng.standard_normal(n)
    x2 = rng.standard_normal(n)
    arm = rng.random(n) < 1.0 / (1.0 + np.exp(-x1))
    y = 1.0 + 2.0 * arm + 0.5 * x1 + 0.1 * rng.standard_normal(n)
    data_path = tmp_path / "table.csv"
    with open(data_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["y", "t", "x1", "x2"])
        for i in range(n):
            writer.writerow([f"{y[i]:.10g}", "b" if arm[i] else "a",
                             f"{x1[i]:.10g}", f"{x2[i]:.10g}"])
    roles_path = tmp_path / "roles.txt"
    roles_path.write_text(
        "# column roles\n"
        "y = outcome\n"
        "t = treatment\n"
        "x1 = numeric\n"
        "x2 = numeric\n"
    )
    return data_path, roles_path


FIT_FLAGS = ["--versions", "1,1", "--restarts", "1", "--seed", "3"]


def test_fit_writes_both_report_files(tmp_path):
    data_path, roles_path = make_table(tmp_path)
    out = tmp_path / "out"
    code = main(["fit", "--data", str(data_path), "--roles", str(roles_path),
                 *FIT_FLAGS, "--out", str(out)])
    assert code == 0
    tabular = load_report(out / "estimates.csv", "tabular")
    structured = load_report(out / "report.json", "structured")
    assert set(tabular.version_effects) == {(0, 0), (1, 0)}
    assert structured.n_used == 120
    assert structured.version_effects == tabular.version_effects
    assert structured.preprocess["treatment_levels"] == ["a", "b"]


def test_fit_cli_matches_library_call_exactly(tmp_path):
    data_path, roles_path = make_table(tmp_path)
    out = tmp_path / "out"
    assert main(["fit", "--data", str(data_path), "--roles", str(roles_path),
                 *FIT_FLAGS, "--out", str(out)]) == 0

    table = ingest(data_path, read_roles(roles_path))
    data, _ = preprocess(table)
    fit = fit_pipeline(data, VersionStructure.parse("1,1"),
                       EmConfig(tol=1e-6, max_iter=500, restarts=1, seed=3))
    expected = build_report(data, fit)

    loaded = load_report(out / "estimates.csv", "tabular")
    assert loaded.version_effects == expected.version_effects
    assert loaded.treatment_effects == expected.treatment_effects


def test_fit_rerun_is_byte_identical(tmp_path):
    data_path, roles_path = make_table(tmp_path)
    outs = [tmp_path / "run1", tmp_path / "run2"]
    for out in outs:
        assert main(["fit", "--data", str(data_path), "--roles", str(roles_path),
                     *FIT_FLAGS, "--out", str(out)]) == 0
    for name in ("estimates.csv", "report.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_simulate_writes_metrics_and_replicates(tmp_path):
    outs = [tmp_path / "s1", tmp_path / "s2"]
    for out in outs:
        code = main(["simulate", "--n", "60", "--p", "3", "--snr", "8",
                     "--treatments", "1", "--versions", "2", "--reps", "2",
                     "--restarts", "2", "--seed", "11", "--out", str(out)])
        assert code == 0
    with open(outs[0] / "metrics.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert {(r["t"], r["v"], r["v2"]) for r in rows} == {("0", "0", "1")}
    for row in rows:
        float(row["bias"]), float(row["sd"])
    for name in ("metrics.csv", "replicates.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_simulate_arm_count_mismatch_fails(tmp_path, capsys):
    code = main(["simulate", "--n", "50", "--p", "3", "--snr", "5",
                 "--treatments", "2", "--versions", "2", "--reps", "1",
                 "--seed", "1", "--out", str(tmp_path / "x")])
    assert code == 1
    err = capsys.readouterr().err
    assert "error:" in err and "--versions" in err


def test_bootstrap_intervals_are_percentiles_of_saved_replicates(tmp_path):
    data_path, roles_path = make_table(tmp_path, n=80, seed=9)
    out = tmp_path / "boot"
    code = main(["bootstrap", "--data", str(data_path), "--roles", str(roles_path),
                 *FIT_FLAGS, "--B", "12", "--out", str(out)])
    assert code == 0
    report = load_report(out / "report.json", "structured")
    assert report.bootstrap_meta["n_resamples"] == 12
    assert report.bootstrap_meta["n_failures"] == 0
    with open(out / "replicates.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    for t in (0, 1):
        draws = [float(r["value"]) for r in rows
                 if r["kind"] == "version_effect" and r["t"] == str(t) and r["v"] == "0"]
        assert len(draws) == 12
        lo, hi = np.percentile(draws, [2.5, 97.5])
        got_lo, got_hi = report.intervals[("version_effect", t, 0)]
        assert got_lo == pytest.approx(float(lo), rel=1e-12)
        assert got_hi == pytest.approx(float(hi), rel=1e-12)


def test_report_conversion_to_stdout_and_file(tmp_path, capsys):
    data_path, roles_path = make_table(tmp_path)
    out = tmp_path / "fit"
    assert main(["fit", "--data", str(data_path), "--roles", str(roles_path),
                 *FIT_FLAGS, "--out", str(out)]) == 0
    capsys.readouterr()

    assert main(["report", "--in", str(out / "report.json"), "--format", "tabular"]) == 0
    stdout = capsys.readouterr().out
    assert stdout.splitlines()[0].startswith("kind,")
    assert stdout == (out / "estimates.csv").read_text()

    converted = tmp_path / "from_csv.json"
    assert main(["report", "--in", str(out / "estimates.csv"),
                 "--format", "structured", "--out", str(converted)]) == 0
    round_trip = load_report(converted, "structured")
    direct = load_report(out / "estimates.csv", "tabular")
    assert round_trip.version_effects == direct.version_effects


def test_missing_input_file_exits_one(tmp_path, capsys):
    code = main(["fit", "--data", str(tmp_path / "nope.csv"),
                 "--roles", str(tmp_path / "nope.roles"),
                 *FIT_FLAGS, "--out", str(tmp_path / "o")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_invalid_floor_exits_one(tmp_path, capsys):
    data_path, roles_path = make_table(tmp_path, n=60)
    code = main(["fit", "--data", str(data_path), "--roles", str(roles_path),
                 *FIT_FLAGS, "--floor", "0.5", "--out", str(tmp_path / "o")])
    assert code == 1
    assert "floor" in capsys.readouterr().err


def test_missing_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main([])
    assert excinfo.value.code == 2


def test_console_entry_point_subprocess(tmp_path):
    data_path, roles_path = make_table(tmp_path, n=60, seed=2)
    out = tmp_path / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "mixipw.cli", "fit", "--data", str(data_path),
         "--roles", str(roles_path), *FIT_FLAGS, "--out", str(out)],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    assert "usable units" in proc.stderr
    assert (out / "estimates.csv").exists() and (out / "report.json").exists()
