"""Command line entry points: exit codes, file outputs, determinism."""

import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from feedbackq.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, SWEEP_COLUMNS, main


CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def bench_doc(**overrides):
    doc = {
        "seed": 7,
        "model": {
            "family": "ising",
            "n": 2,
            "couplings": [[0.0, 0.5], [0.5, 0.0]],
            "fields": [1.0, 2.0],
        },
        "controls": "y_per_qubit",
        "initial_state": "plus",
        "target": 1,
        "alpha": {"strategy": "fixed", "values": [7.0]},
        "feedback": {"dt": 0.08, "gains": [1.5, 1.5], "depth": 60},
    }
    doc.update(overrides)
    return doc


def write_doc(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_writes_trace_and_summary(tmp_path):
    cfg = write_doc(tmp_path, bench_doc())
    out = str(tmp_path / "bench")
    assert main(["run", "--config", cfg, "--out", out]) == EXIT_OK

    rows = read_rows(tmp_path / "bench_trace.csv")
    assert rows[0] == ["layer", "u_1", "u_2", "V", "energy", "fid_0", "fid_1"]
    assert len(rows) == 61
    assert [r[0] for r in rows[1:]] == [str(k) for k in range(1, 61)]
    v_col = [float(r[3]) for r in rows[1:]]
    assert v_col[-1] < -1.3
    assert max(np.diff(v_col)) <= 1e-9
    assert float(rows[-1][6]) > 0.9

    summary = json.loads((tmp_path / "bench_summary.json").read_text())
    assert summary["target"] == 1
    assert summary["alphas"] == [7.0]
    assert summary["final_energy"] == pytest.approx(float(rows[-1][4]))
    assert summary["final_lyapunov"] == pytest.approx(v_col[-1])
    assert len(summary["final_fidelities"]) == 2
    assert summary["wall_time_s"] >= 0.0


def test_trace_values_carry_twelve_significant_digits(tmp_path):
    cfg = write_doc(tmp_path, bench_doc(feedback={"dt": 0.08, "gains": [1.5, 1.5], "depth": 5}))
    out = str(tmp_path / "digits")
    assert main(["run", "--config", cfg, "--out", out]) == EXIT_OK
    rows = read_rows(tmp_path / "digits_trace.csv")
    cell = rows[1][3]
    assert cell == "%.12g" % float(cell)
    assert float(cell) == pytest.approx(1.75, abs=1e-6)
    assert len(rows[2][3].replace("-", "").replace(".", "").lstrip("0")) >= 10


def test_sampled_run_is_byte_deterministic(tmp_path):
    doc = bench_doc(
        feedback={
            "dt": 0.08, "gains": [1.5, 1.5], "depth": 25,
            "backend": "overlap_hadamard", "shots": 200,
        }
    )
    cfg = write_doc(tmp_path, doc)
    for name in ("a", "b"):
        assert main(["run", "--config", cfg, "--out", str(tmp_path / name)]) == EXIT_OK
    assert (tmp_path / "a_trace.csv").read_bytes() == (tmp_path / "b_trace.csv").read_bytes()

    assert main(["run", "--config", cfg, "--out", str(tmp_path / "c"), "--seed", "8"]) == EXIT_OK
    assert (tmp_path / "a_trace.csv").read_bytes() != (tmp_path / "c_trace.csv").read_bytes()


def test_exact_override_removes_shot_noise(tmp_path):
    doc = bench_doc(
        feedback={
            "dt": 0.08, "gains": [1.5, 1.5], "depth": 25,
            "backend": "overlap_hadamard", "shots": 50,
        }
    )
    cfg = write_doc(tmp_path, doc)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "noisy")]) == EXIT_OK
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "clean"), "--exact"]) == EXIT_OK

    exact_doc = bench_doc(feedback={"dt": 0.08, "gains": [1.5, 1.5], "depth": 25})
    cfg2 = write_doc(tmp_path, exact_doc, name="exact.json")
    assert main(["run", "--config", cfg2, "--out", str(tmp_path / "ref")]) == EXIT_OK

    clean = read_rows(tmp_path / "clean_trace.csv")
    ref = read_rows(tmp_path / "ref_trace.csv")
    assert clean == ref
    assert read_rows(tmp_path / "noisy_trace.csv") != ref


def test_config_rejection_paths(tmp_path):
    bad_depth = write_doc(
        tmp_path, bench_doc(feedback={"dt": 0.08, "gains": [1.5, 1.5], "depth": 0})
    )
    assert main(["run", "--config", bad_depth]) == EXIT_CONFIG

    assert main(["run", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG

    garbled = tmp_path / "garbled.json"
    garbled.write_text("{not json")
    assert main(["run", "--config", str(garbled)]) == EXIT_CONFIG

    unknown = write_doc(tmp_path, bench_doc(model={"family": "heisenberg"}), "m.json")
    assert main(["run", "--config", unknown]) == EXIT_CONFIG

    bad_state = write_doc(tmp_path, bench_doc(initial_state="012"), "s.json")
    assert main(["run", "--config", bad_state]) == EXIT_CONFIG

    bad_alpha = write_doc(
        tmp_path, bench_doc(alpha={"strategy": "fixed", "values": [1.0, 2.0]}), "a.json"
    )
    assert main(["run", "--config", bad_alpha]) == EXIT_CONFIG


def test_runtime_failure_flushes_partial_trace(tmp_path):
    doc = bench_doc(
        target=0,
        controls="global_xyz",
        feedback={"dt": 0.08, "gains": [1.0, 1.0, 1.0], "depth": 30, "backend": "grad_psr"},
    )
    doc.pop("alpha")
    cfg = write_doc(tmp_path, doc)
    out = str(tmp_path / "partial")
    assert main(["run", "--config", cfg, "--out", out]) == EXIT_RUNTIME
    rows = read_rows(tmp_path / "partial_trace.csv")
    assert rows[0][:4] == ["layer", "u_1", "u_2", "u_3"]
    assert len(rows) == 2

    summary = json.loads((tmp_path / "partial_summary.json").read_text())
    assert "error" in summary
    assert summary["layers_completed"] == 1


def test_spectrum_reproduces_low_lying_energies(tmp_path):
    out = str(tmp_path / "spec")
    code = main(
        ["spectrum", "--config", str(CONFIG_DIR / "ising_41_spectrum.json"), "--out", out]
    )
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "spec_spectrum.json").read_text())
    energies = summary["energies"]
    assert len(energies) == 2
    assert energies[0] == pytest.approx(-2.5, abs=0.15)
    assert energies[1] == pytest.approx(-1.5, abs=0.15)
    assert summary["reference_energies"] == pytest.approx([-2.5, -1.5])
    for stage in range(2):
        assert (tmp_path / f"spec_stage{stage}_trace.csv").exists()


def test_validate_reports_assumptions(tmp_path, capsys):
    out = str(tmp_path / "val")
    code = main(
        ["validate", "--config", str(CONFIG_DIR / "ising_41_run.json"), "--out", out]
    )
    assert code == EXIT_OK
    report = json.loads((tmp_path / "val_validate.json").read_text())
    # coincident gaps (two pairs differ by 3) break assumption 1
    assert report["assumption1_distinct_gaps"]["holds"] is False
    # every single-qubit Y leaves some basis pairs unconnected
    assert report["assumption2_fully_connected"]["holds"] is False
    assert all(
        c["zero_offdiagonal_pairs"] > 0
        for c in report["assumption2_fully_connected"]["channels"]
    )
    # the shifted operator with alpha=7 has spectrum -1.5, 0.5, 3.5, 4.5
    assert report["assumption3_nondegenerate_shifted"]["holds"] is True
    assert report["assumption3_nondegenerate_shifted"]["min_gap"] == pytest.approx(1.0)
    assert report["alpha_sufficiency"][0]["sufficient"] is True
    text = capsys.readouterr().out
    assert "assumption 1" in text and "violated" in text


def test_validate_rejects_large_models(tmp_path):
    doc = {
        "model": {"family": "ising_random", "n": 13, "instance_seed": 0},
        "feedback": {"dt": 0.01, "gains": 1.0, "depth": 5},
    }
    cfg = write_doc(tmp_path, doc)
    assert main(["validate", "--config", cfg]) == EXIT_CONFIG


def test_sweep_r_axis_records_missing_rows_as_nan(tmp_path):
    doc = {
        "seed": 1,
        "model": {"family": "h2", "R": 1.05},
        "controls": "y_per_qubit",
        "initial_state": "01",
        "target": 1,
        "alpha": {"strategy": "fixed", "values": [1.8]},
        "feedback": {"dt": 0.55, "gains": [1.0, 1.0], "depth": 25, "trotter_slices": 16},
        "sweep": {"axis": "R", "values": [1.05, 2.0]},
    }
    cfg = write_doc(tmp_path, doc)
    out = str(tmp_path / "rsweep")
    assert main(["sweep", "--config", cfg, "--out", out]) == EXIT_OK
    rows = read_rows(tmp_path / "rsweep_sweep.csv")
    assert rows[0] == SWEEP_COLUMNS
    assert len(rows) == 3
    good = dict(zip(rows[0], rows[1]))
    assert float(good["value"]) == 1.05
    assert 0.0 <= float(good["mean_fidelity"]) <= 1.0
    bad = dict(zip(rows[0], rows[2]))
    assert bad["mean_fidelity"] == "nan"

    summary = json.loads((tmp_path / "rsweep_sweep.json").read_text())
    assert summary["axis"] == "R"
    assert len(summary["rows"]) == 2
    assert summary["failed_points"] == 1


def test_sweep_seed_axis_runs_instances(tmp_path):
    doc = {
        "seed": 3,
        "model": {"family": "ising_random", "n": 3, "instance_seed": 0},
        "controls": "x_mixer",
        "target": 1,
        "alpha": {"strategy": "fixed", "values": [4.0]},
        "feedback": {"dt": 0.05, "gains": [1.0], "depth": 30},
        "sweep": {"axis": "seed", "values": [0, 1, 2]},
    }
    cfg = write_doc(tmp_path, doc)
    out = str(tmp_path / "seeds")
    assert main(["sweep", "--config", cfg, "--out", out]) == EXIT_OK
    rows = read_rows(tmp_path / "seeds_sweep.csv")
    assert len(rows) == 4
    for row in rows[1:]:
        record = dict(zip(rows[0], row))
        assert float(record["dt"]) == 0.05
        assert 0.0 <= float(record["mean_fidelity"]) <= 1.0


def test_sweep_n_axis_tunes_the_time_step(tmp_path):
    doc = {
        "seed": 0,
        "controls": "x_mixer",
        "target": 1,
        "feedback": {"depth": 60},
        "sweep": {
            "axis": "n",
            "values": [2, 3],
            "instances": 2,
            "alpha": 4.0,
            "dt_candidates": [0.1, 0.05, 0.02, 0.01, 0.005, 0.002],
            "monotone_tolerance": 1e-6,
        },
    }
    cfg = write_doc(tmp_path, doc)
    out = str(tmp_path / "nsweep")
    assert main(["sweep", "--config", cfg, "--out", out]) == EXIT_OK
    rows = read_rows(tmp_path / "nsweep_sweep.csv")
    assert len(rows) == 3
    for row in rows[1:]:
        record = dict(zip(rows[0], row))
        assert record["instances"] == "2"
        assert float(record["dt"]) in (0.1, 0.05, 0.02, 0.01, 0.005, 0.002)
        assert 0.0 <= float(record["mean_fidelity"]) <= 1.0


def test_sweep_parallel_matches_serial(tmp_path):
    doc = {
        "seed": 3,
        "model": {"family": "ising_random", "n": 3, "instance_seed": 0},
        "controls": "x_mixer",
        "target": 1,
        "alpha": {"strategy": "fixed", "values": [4.0]},
        "feedback": {"dt": 0.05, "gains": [1.0], "depth": 20},
        "sweep": {"axis": "seed", "values": [0, 1]},
    }
    cfg = write_doc(tmp_path, doc)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "ser")]) == EXIT_OK
    code = main(["sweep", "--config", cfg, "--out", str(tmp_path / "par"), "--jobs", "2"])
    assert code == EXIT_OK
    assert (tmp_path / "ser_sweep.csv").read_bytes() == (tmp_path / "par_sweep.csv").read_bytes()


def test_sweep_without_sweep_block_is_rejected(tmp_path):
    cfg = write_doc(tmp_path, bench_doc())
    assert main(["sweep", "--config", cfg]) == EXIT_CONFIG


def test_csv_schema_depends_only_on_channels_and_tracked(tmp_path):
    one = bench_doc(
        controls="x_mixer",
        alpha={"strategy": "fixed", "values": [7.0]},
        feedback={"dt": 0.08, "gains": [1.0], "depth": 5},
    )
    cfg = write_doc(tmp_path, one)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "one")]) == EXIT_OK
    header = read_rows(tmp_path / "one_trace.csv")[0]
    assert header == ["layer", "u_1", "V", "energy", "fid_0", "fid_1"]

    other = {
        "seed": 2,
        "model": {"family": "h2", "R": 1.05},
        "controls": "x_mixer",
        "target": 1,
        "alpha": {"strategy": "fixed", "values": [1.8]},
        "feedback": {"dt": 0.55, "gains": [1.0], "depth": 5, "trotter_slices": 4},
    }
    cfg2 = write_doc(tmp_path, other, name="other.json")
    assert main(["run", "--config", cfg2, "--out", str(tmp_path / "two")]) == EXIT_OK
    assert read_rows(tmp_path / "two_trace.csv")[0] == header


def test_module_entrypoint_runs(tmp_path):
    cfg = write_doc(tmp_path, bench_doc(feedback={"dt": 0.08, "gains": [1.5, 1.5], "depth": 3}))
    proc = subprocess.run(
        [sys.executable, "-m", "feedbackq", "run", "--config", cfg,
         "--out", str(tmp_path / "mod")],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == EXIT_OK
    assert (tmp_path / "mod_trace.csv").exists()


def test_shipped_configs_parse(tmp_path):
    for name in (
        "ising_41_run.json",
        "ising_41_spectrum.json",
        "ising_41_shots.json",
        "h2_spectrum.json",
        "h2_r_sweep.json",
        "mfi_run.json",
        "ising_scaling_sweep.json",
        "ising_seed_sweep.json",
    ):
        assert json.loads((CONFIG_DIR / name).read_text())
