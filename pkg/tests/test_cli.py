## Copyright © 2023, Alex J. Champandard.  Licensed under MIT; see LICENSE! ⚘

import json

import pytest
from click.testing import CliRunner

from roddsim.__main__ import main
from roddsim.harness import HEADER


@pytest.fixture
def runner():
    return CliRunner()


def test_bound_csma(runner):
    result = runner.invoke(main, ["bound", "csma", "0", "428", "2000"])
    assert result.exit_code == 0, result.output
    lines = result.output.strip().splitlines()
    assert lines[0] == ",".join(HEADER)
    values = [float(line.split(",")[3]) for line in lines[1:]]
    assert values[0] == 1.0
    assert values[1] <= 0.01 and values[2] < values[1]


def test_bound_to_file(runner, tmp_path):
    path = tmp_path / "bound.csv"
    result = runner.invoke(main, ["bound", "aloha", "1000", "--snr", "50 dB", "--out", str(path)])
    assert result.exit_code == 0, result.output
    assert path.read_text(encoding="utf-8").startswith("scheme,axis,value")


def test_bound_requires_budgets(runner):
    assert runner.invoke(main, ["bound", "csma"]).exit_code != 0


def test_sweep_command(runner, tmp_path):
    config = {
        "experiment": "cli",
        "axis": "threshold",
        "grid": [0.5, 2.0],
        "schemes": ["csma_mc", "csma_bound"],
        "trials": 3,
        "network": {"nodes": 30, "side": 100.0},
        "access": {"budget": 200},
    }
    path = tmp_path / "cli.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    out = tmp_path / "rows.csv"

    result = runner.invoke(main, ["sweep", str(path), "--trials", "1", "--out", str(out)])
    assert result.exit_code == 0, result.output
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + 4
    # The command-line trial count replaces the configured one.
    assert all(line.split(",")[5] == "1" for line in lines[1:])


def test_sweep_rejects_bad_config(runner, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"grid": [1], "axis": "bandwidth"}), encoding="utf-8")
    result = runner.invoke(main, ["sweep", str(path)])
    assert result.exit_code == 1
    assert "Error" in result.output


def test_sweep_missing_file(runner, tmp_path):
    assert runner.invoke(main, ["sweep", str(tmp_path / "absent.json")]).exit_code == 2


@pytest.mark.slow
def test_sim_aloha(runner):
    result = runner.invoke(main, ["sim", "aloha", "--budget", "200", "--seed", "1"])
    assert result.exit_code == 0, result.output
    row = result.output.strip().splitlines()[1].split(",")
    assert row[0] == "aloha_mc" and 0.0 <= float(row[3]) <= 1.0
