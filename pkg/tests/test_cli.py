import argparse
import subprocess
import sys

import numpy as np
import pytest
import yaml

from dqedmd.cli import main, parse_bits
from dqedmd.edmd import load_model
from dqedmd.harness import read_metadata, read_results, read_trajectories


@pytest.mark.parametrize("text,expected", [
    ("8", [8]), ("4,6,8", [4, 6, 8]), ("4-7", [4, 5, 6, 7]), ("2,5-6", [2, 5, 6]),
])
def test_parse_bits(text, expected):
    assert parse_bits(text) == expected


@pytest.mark.parametrize("text", ["", "x", "0", "4-x"])
def test_parse_bits_rejects(text):
    with pytest.raises(argparse.ArgumentTypeError):
        parse_bits(text)


def test_simulate_and_fit(tmp_path, capsys):
    traj = tmp_path / "t.csv"
    assert main(["simulate", "--system", "vanderpol", "--trajectories", "3",
                 "--steps", "50", "--seed", "2", "--output", str(traj)]) == 0
    ts = read_trajectories(traj)
    assert ts.states.shape == (3, 51, 2) and ts.system == "vanderpol"

    model = tmp_path / "m.json"
    assert main(["fit", "--input", str(traj), "--n-centers", "5",
                 "--output", str(model)]) == 0
    est = load_model(model)
    assert est.K.shape == (7, 7)

    qmodel = tmp_path / "q.json"
    assert main(["fit", "--input", str(traj), "--n-centers", "0", "--bits", "8",
                 "--seed", "1", "--output", str(qmodel)]) == 0
    q = load_model(qmodel)
    assert q.dictionary.is_identity
    assert q.meta["quantizer"]["specs"][0]["word_length"] == 8
    assert not np.array_equal(q.K, load_model(model).K[:2, :2])
    assert "wrote model" in capsys.readouterr().out


def _write_config(tmp_path, **over):
    raw = {"system": "pendulum",
           "sim": {"steps_per_trajectory": 100, "n_trajectories": 5},
           "dictionary": {"n_centers": 5},
           "quantizer": {"word_lengths": [6, 8, 10]},
           "trials": 2,
           "output_path": str(tmp_path / "out.csv")}
    raw.update(over)
    p = tmp_path / "cfg.yaml"
    p.write_text(yaml.safe_dump(raw))
    return p


def test_sweep_and_report(tmp_path, capsys):
    cfg = _write_config(tmp_path)
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", str(cfg), "--bits", "6,8", "--seed", "4",
                 "--output", str(out), "--threads", "2"]) == 0
    records = read_results(out)
    assert [(r.word_length, r.trial_index) for r in records] == [(6, 0), (6, 1), (8, 0), (8, 1)]
    assert read_metadata(out)["master_seed"] == "4"
    capsys.readouterr()
    assert main(["report", str(out)]) == 0
    text = capsys.readouterr().out
    assert "rel_K_error" in text and text.count("pendulum") >= 2


def test_recover(tmp_path):
    cfg = _write_config(tmp_path, system="linear", sim={
        "dt": 1.0, "steps_per_trajectory": 50, "n_trajectories": 20},
        dictionary={"n_centers": 0}, eval={"holdout_fraction": 0.0, "on_training": True})
    out = tmp_path / "r.csv"
    assert main(["recover", "--config", str(cfg), "--bits", "8", "--output", str(out)]) == 0
    assert all(r.recovery_rel_K_error is not None for r in read_results(out))


def test_recover_rejects_nonlinear_dictionary(tmp_path, capsys):
    cfg = _write_config(tmp_path)
    assert main(["recover", "--config", str(cfg)]) == 2
    assert "identity observables" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["sweep", "--config", "does_not_exist.yaml"],
    ["report", "does_not_exist.csv"],
    ["fit", "--input", "does_not_exist.csv"],
])
def test_errors_exit_nonzero(argv, capsys):
    assert main(argv) == 2
    assert "error" in capsys.readouterr().err


def test_bad_config_value(tmp_path, capsys):
    cfg = _write_config(tmp_path, trials=0)
    assert main(["sweep", "--config", str(cfg)]) == 2
    assert "trials" in capsys.readouterr().err


def test_usage_errors_exit_nonzero():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--system", "linear"])
    assert exc.value.code != 0
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--config", "x", "--bits", "0"])
    assert exc.value.code != 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "dqedmd", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("dqedmd ")
