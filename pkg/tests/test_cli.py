import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import FIXTURES, monte_carlo_chain
from qmi.cli import main


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    return code


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--seed", "17", "--games", "1500", "--out", str(out)]) == 0
    assert main(["ingest", "--input", str(out / "plays.csv"), "--out", str(out)]) == 0
    return out


def test_unknown_command_exits_2():
    p = subprocess.run([sys.executable, "-m", "qmi.cli", "frobnicate"], capture_output=True, text=True)
    assert p.returncode == 2
    assert "usage:" in p.stderr


def test_missing_seed_is_config_error(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "config" and err["exit_code"] == 2


def test_missing_input_is_config_error(tmp_path, capsys):
    assert main(["estimate", "--input", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2


def test_bad_data_exit_3(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("game_id,play_id\n1,1\n")
    assert main(["estimate", "--input", str(bad), "--out", str(tmp_path)]) == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["type"] == "MissingColumn"


def test_numerical_error_exit_4(tmp_path, capsys):
    toy = tmp_path / "toy.json"
    toy.write_text(json.dumps({"P": [[1.0, 0.0], [0.0, 1.0]], "r": [1.0, 0.0]}))
    assert main(["value", "--input", str(toy), "--out", str(tmp_path)]) == 4


def test_value_on_toy_fixture(tmp_path):
    assert main(["value", "--input", str(FIXTURES / "toy_chain.json"), "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "value_table.csv")))
    d = json.loads((FIXTURES / "toy_chain.json").read_text())
    P, r = np.array(d["P"]), np.array(d["r"])
    mean, se = monte_carlo_chain(P, r, 100_000, seed=4)
    cum = np.array([float(x["cumulative"]) for x in rows])
    v = np.array([float(x["value"]) for x in rows])
    assert np.all(np.abs(cum - mean) <= 3 * se)
    assert np.allclose(v, cum - r, atol=1e-15)


def test_inverse_recovers_planted_tau(sim_dir, tmp_path):
    assert main(["inverse", "--input", str(sim_dir / "game_logs.jsonl"), "--out", str(tmp_path)]) == 0
    sets = json.loads((tmp_path / "tau_sets.json").read_text())["sets"]
    # sampling and the monotone smoother can move the set by a grid point or two
    assert sets["OPPONENT_HALF"]["point_estimate"] == pytest.approx(0.35, abs=0.03)
    assert sets["OWN_HALF"]["point_estimate"] == pytest.approx(0.55, abs=0.03)


def assert_valid(path):
    if path.suffix in (".json",):
        json.loads(path.read_text())
    elif path.suffix == ".jsonl":
        for line in path.read_text().splitlines():
            json.loads(line)
    elif path.suffix == ".csv":
        with open(path) as fh:
            widths = {len(row) for row in csv.reader(fh)}
        assert len(widths) == 1, path


COMMANDS = ["estimate", "value", "surface", "policy", "inverse", "partitions"]


def test_all_commands_valid_and_reproducible(sim_dir, tmp_path):
    elo = tmp_path / "elo.csv"
    teams = sorted({line.split(",")[4] for line in (sim_dir / "plays.csv").read_text().splitlines()[1:]})
    elo.write_text("team,season,elo\n" + "".join(f"{t},2030,{1450 + 7 * k}\n" for k, t in enumerate(teams)))
    outs = []
    for rep in range(2):
        out = tmp_path / f"run{rep}"
        src = str(sim_dir / "game_logs.jsonl")
        for c in COMMANDS:
            assert main([c, "--input", src, "--out", str(out)]) == 0, c
        assert main(["bootstrap", "--input", src, "--out", str(out), "--seed", "5", "--boot-B", "3",
                     "--threads", "2"]) == 0
        assert main(["regress", "--input", src, "--out", str(out), "--elo", str(elo), "--min-n", "5"]) == 0
        assert main(["report", "--out", str(out)]) == 0
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == sorted(p.name for p in outs[1].iterdir())
    for name in names:
        assert_valid(outs[0] / name)
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
    manifest = json.loads((outs[0] / "manifest.json").read_text())
    assert {a["file"] for a in manifest["artifacts"]} == set(names) - {"manifest.json"}


def test_simulate_reproducible(tmp_path):
    for k in range(2):
        assert main(["simulate", "--seed", "3", "--games", "20", "--out", str(tmp_path / str(k))]) == 0
    for name in ("plays.csv", "truth.json"):
        assert (tmp_path / "0" / name).read_bytes() == (tmp_path / "1" / name).read_bytes()


def test_filters_and_flags(sim_dir, tmp_path):
    src = str(sim_dir / "game_logs.jsonl")
    assert main(["inverse", "--input", src, "--out", str(tmp_path / "a"), "--quarters", "1-3",
                 "--wp-range", "0.2,0.8", "--seasons", "2030", "--augment-go", "off", "--td-value", "7"]) == 0
    full = json.loads((tmp_path / "a" / "tau_sets.json").read_text())
    assert full["sets"]["OWN_HALF"]["n"] > 0


def test_prescriptions(sim_dir, tmp_path):
    import pandas as pd

    plays = pd.read_csv(sim_dir / "plays.csv", dtype={"game_id": str})
    fourth = plays[(plays["down"] == 4) & plays["play_type"].isin(["punt", "field_goal", "pass", "run"])]
    pres = pd.DataFrame({"game_id": fourth["game_id"], "play_id": fourth["play_id"], "action": "GO"})
    path = tmp_path / "bot.csv"
    pres.to_csv(path, index=False)
    out = tmp_path / "boot"
    assert main(["bootstrap", "--input", str(sim_dir / "game_logs.jsonl"), "--out", str(out), "--seed", "1",
                 "--boot-B", "3", "--prescriptions", str(path)]) == 0
    diffs = json.loads((out / "tau_differences.json").read_text())
    assert set(diffs) == {"OPPONENT_HALF", "OWN_HALF"}
    assert all(d["paired"] for d in diffs.values())
    # always going for it looks more risk tolerant than the planted coach
    assert all(d["estimate"] < 0 for d in diffs.values())


def test_log_level_env(monkeypatch, tmp_path):
    monkeypatch.setenv("QMI_LOG_LEVEL", "debug")
    assert main(["value", "--input", str(FIXTURES / "toy_chain.json"), "--out", str(tmp_path)]) == 0
