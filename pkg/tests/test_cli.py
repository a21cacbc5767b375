from __future__ import annotations

import numpy as np
import pytest

from plasmon_cqed import cli, validation
from plasmon_cqed.results import read_table
from plasmon_cqed.validation import CheckResult, ValidationHooks, check_extinction

PAIR = """
[model]
sector_cap = 1

[nanocavity]

[emitter.1]
kappa_vib = 0
[emitter.2]
kappa_vib = 0

[initial]
state = emitter:1

[evolution]
t_max = 250
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_simulate_writes_dark_state_timeseries(tmp_path, capsys):
    cfg = write(tmp_path, PAIR)
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "out"), "--seed-free"]) == 0
    header, cols = read_table(tmp_path / "out" / "timeseries.csv")
    assert header["command"] == "simulate"
    assert cols["P_S"][0] == pytest.approx(0.5) and cols["P_S"][-1] < 1e-6
    assert np.allclose(cols["P_A"], 0.5, atol=1e-12)
    assert (tmp_path / "out" / "summary.csv").exists()
    assert "wrote" in capsys.readouterr().out


def test_steady_and_hybrid(tmp_path, capsys):
    cfg = write(tmp_path, "[nanocavity]\n[emitter.1]\n[drive]\n")
    assert cli.main(["steady", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 0
    header, cols = read_table(tmp_path / "s" / "summary.csv")
    assert header["note.convergence_check"] == "checked"
    assert cols["extinction"][0] > 0
    assert cli.main(["hybrid", "--config", str(cfg)]) == 0
    assert "splitting" in capsys.readouterr().out


def test_sweep_command(tmp_path):
    cfg = write(tmp_path, "[nanocavity]\n[emitter.1]\n[drive]\n[sweep]\naxis1 = delta_cav:-20:20:2\n"
                          "axis2 = delta_p:-50:50:3\nobservable = extinction\n")
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o"), "--workers", "1"]) == 0
    _, cols = read_table(tmp_path / "o" / "sweep.csv")
    assert len(cols["extinction"]) == 6


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "[nanocavity]\nkappa_outt = 3\n[initial]\nstate = photon\n")
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "run.ini:2:1" in err and "kappa_out" in err
    cfg = write(tmp_path, "[nanocavity]\n[initial]\nstate = photon\n", "nosweep.ini")
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_solver_failure_exit_code(tmp_path):
    cfg = write(tmp_path, "[model]\nn_max = 1\n[nanocavity]\n[drive]\nphoton_number = 0.3\n")
    assert cli.main(["steady", "--config", str(cfg), "--out", str(tmp_path / "o")]) == cli.EXIT_SOLVER


def test_io_failure_exit_code(tmp_path):
    cfg = write(tmp_path, "[nanocavity]\n[emitter.1]\n[drive]\n")
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert cli.main(["steady", "--config", str(cfg), "--out", str(blocker / "out")]) == cli.EXIT_SOLVER


def test_validate_exit_codes(monkeypatch, tmp_path, capsys):
    def fake(passed):
        return lambda **kw: [CheckResult(1, "x", passed, "m", "t", 0.0)]

    monkeypatch.setattr(validation, "run_checks", fake(True))
    assert cli.main(["validate", "--out", str(tmp_path)]) == cli.EXIT_OK
    monkeypatch.setattr(validation, "run_checks", fake(False))
    assert cli.main(["validate"]) == cli.EXIT_VALIDATION
    assert "0 of 1 checks passed" in capsys.readouterr().out
    assert (tmp_path / "validation.txt").exists()


def test_corrupted_in_coupling_fails_the_extinction_check():
    assert check_extinction(ValidationHooks()).passed
    bad = check_extinction(ValidationHooks(corrupt_kappa_in=True))
    assert not bad.passed and "1.000e+00" in bad.measured


def test_workers_argument_validation(tmp_path):
    cfg = write(tmp_path, PAIR)
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path), "--workers", "0"]) == cli.EXIT_CONFIG
