import json
import os
import subprocess
import sys

import numpy as np
import pytest

from nvsparse.cli import main
from nvsparse.fields import preset_field, sample_field
from nvsparse.io import read_csv, read_json, read_pgm

TINY = {
    "seed": 3,
    "sequence": {"n_blocks": 2},
    "noise": {"n_detunings": 3, "n_trajectories": 2},
    "field": {"table_points": 41},
    "kriging": {"budget": 80, "starts": 2},
    "optimize": {"budget": 20, "restarts": 2, "grid_points": 5},
    "characterize": {"n_blocks": [2], "b_points": 21, "fringe_blocks": 2, "fringe_points": 9},
    "sweep": {"variable": "n", "values": [9, 16], "repetitions": 2},
}
COMMANDS = ["optimize-pulse", "characterize", "sense", "reconstruct", "sweep"]


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY))
    return str(path)


def run(cmd, cfg, out, *extra):
    return main([cmd, "--config", cfg, "--out", str(out), *extra])


def data_files(folder):
    return {f: (folder / f).read_bytes() for f in sorted(os.listdir(folder))}


def test_all_commands_write_outputs(tiny, tmp_path):
    out = tmp_path / "o"
    for c in COMMANDS:
        assert run(c, tiny, out) == 0, c
    names = set(os.listdir(out))
    for f in ["pm_params.json", "fidelity_table.csv", "objective_report.json", "response_N2_rect.csv",
              "response_N2_pm.csv", "sensitivity.json", "fringe_N2.csv", "truth.pgm", "truth.csv",
              "samples.csv", "references.csv", "reconstruction.pgm", "model.json", "metrics.json",
              "sweep_n.csv"] + [f"{c}.manifest.json" for c in COMMANDS]:
        assert f in names, f
    man = read_json(out / "sense.manifest.json")
    assert man["seed"] == 3 and len(man["config_hash"]) == 64
    assert set(man["files"]) == {"truth.pgm", "truth.csv", "samples.csv", "references.csv",
                                 "measurement_model.json"}
    assert len(read_csv(out / "references.csv")) == 10
    assert len(read_csv(out / "samples.csv")) == 25
    assert read_pgm(out / "truth.pgm").shape == (100, 100)
    metrics = read_json(out / "metrics.json")
    assert set(metrics["mabe"]) >= {"mae", "rmse", "psnr_db", "r2", "ssim"}


def test_rerun_is_byte_identical(tiny, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        for c in COMMANDS:
            assert run(c, tiny, out) == 0
    assert data_files(a) == data_files(b)


def test_different_seed_changes_samples(tiny, tmp_path):
    run("sense", tiny, tmp_path / "a")
    run("sense", tiny, tmp_path / "b", "--seed", "4")
    assert (tmp_path / "a" / "samples.csv").read_bytes() != (tmp_path / "b" / "samples.csv").read_bytes()
    assert read_json(tmp_path / "b" / "sense.manifest.json")["seed"] == 4


def test_flag_overrides(tiny, tmp_path):
    out = tmp_path / "o"
    assert run("sense", tiny, out, "--n", "16", "--strategy", "spiral", "--field-preset", "single") == 0
    assert len(read_csv(out / "samples.csv")) == 16
    mm = read_json(out / "measurement_model.json")
    assert mm["strategy"] == "spiral" and mm["n"] == 16
    assert np.allclose(read_pgm(out / "truth.pgm"), preset_field("single").values, atol=1e-5)
    assert run("reconstruct", tiny, out, "--calibration", "none", "--field-preset", "single") == 0
    assert read_json(out / "metrics.json")["calibration"] == "none"
    cfg = read_json(out / "reconstruct.manifest.json")["config"]
    assert cfg["calibration"] == "none" and cfg["field"]["preset"] == "single"


def test_pulse_flag_selects_sequence(tiny, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run("sense", tiny, a, "--pulse", "rect")
    run("sense", tiny, b, "--pulse", "pm")
    ja, jb = read_json(a / "measurement_model.json"), read_json(b / "measurement_model.json")
    assert ja["t_total_ns"] == jb["t_total_ns"] == 16000
    assert ja["b_min_nT"] != jb["b_min_nT"]


def test_zero_budget_flags_warning(tiny, tmp_path):
    assert run("optimize-pulse", tiny, tmp_path, "--budget", "0") == 0
    rep = read_json(tmp_path / "objective_report.json")
    assert rep["improved"] is False and rep["warning"] and rep["n_evals"] == 0
    assert rep["objective_pm_optimized"] == rep["objective_pm_initial"]


def test_noise_disabled_sampling_recovers_truth(tmp_path):
    cfg = dict(TINY, noise={"fwhm_mhz": 0.0, "ou_sigma_khz": 0.0, "readout_sigma": 0.0,
                            "n_detunings": 1, "n_trajectories": 1},
               sequence={"n_blocks": 2, "pulse": "ideal"})
    path = tmp_path / "quiet.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "o"
    assert run("sense", str(path), out) == 0
    rows = read_csv(out / "samples.csv")
    v = np.array([float(r["value"]) for r in rows])
    xy = np.array([[float(r["x"]), float(r["y"])] for r in rows])
    assert np.allclose(v, sample_field(preset_field("triple"), xy), atol=1e-3)
    assert all(r["warning"] == "" for r in rows)


def test_sweep_row_counts(tiny, tmp_path):
    assert run("sweep", tiny, tmp_path, "--repetitions", "3") == 0
    rows = read_csv(tmp_path / "sweep_n.csv")
    assert len(rows) == 2 * (3 + 1)
    agg = [r for r in rows if r["repetition"] == "aggregate"]
    assert [r["n"] for r in agg] == ["9", "16"] and all(r["status"] == "ok 3/3" for r in agg)
    assert all(r["mae_std"] != "" for r in agg)


def test_parallel_sweep_matches_serial(tiny, tmp_path):
    run("sweep", tiny, tmp_path / "s", "--workers", "1")
    run("sweep", tiny, tmp_path / "p", "--workers", "2")
    assert (tmp_path / "s" / "sweep_n.csv").read_bytes() == (tmp_path / "p" / "sweep_n.csv").read_bytes()


def test_strategy_sweep(tiny, tmp_path):
    assert run("sweep", tiny, tmp_path, "--variable", "strategy", "--repetitions", "1", "--n", "9") == 0
    rows = read_csv(tmp_path / "sweep_strategy.csv")
    assert {r["strategy"] for r in rows} == {"random", "spiral", "square-loop", "serpentine", "grid"}


def test_exit_codes(tiny, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"seed": 1, "bogus": 2}))
    assert run("sense", str(bad), tmp_path / "o") == 2
    bad.write_text(json.dumps({"field": {"preset": "quad"}}))
    assert run("sense", str(bad), tmp_path / "o") == 2
    bad.write_text("{not json")
    assert run("sense", str(bad), tmp_path / "o") == 2
    assert run("sense", str(tmp_path / "missing.json"), tmp_path / "o") == 4
    assert run("reconstruct", tiny, tmp_path / "empty") == 4
    one = tmp_path / "one"
    one.mkdir()
    (one / "samples.csv").write_text("x,y,value,true_value,warning\n0.5,0.5,0.3,0.3,\n")
    (one / "references.csv").write_text("x,y,nominal,measured,warning\n0.5,0.5,0.3,0.3,\n")
    assert run("reconstruct", tiny, one) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "nvsparse.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for c in COMMANDS:
        assert c in r.stdout
