import json
import os

import pytest

from hyperplane.cli import run


def test_enumerate(tmp_path):
    code = run(["--output", str(tmp_path), "enumerate", "--nmax", "4", "--pmax", "3"])
    assert code == 0
    lines = (tmp_path / "counts.csv").read_text().strip().splitlines()
    assert lines[0] == "n,p,count"
    rows = {tuple(ln.split(",")[:2]): ln.split(",")[2] for ln in lines[1:]}
    assert rows[("1", "1")] == "1"
    assert rows[("2", "1")] == "4"
    assert rows[("0", "1")] == "0"  # convention hole resolved by the oracle


def test_tables_dump_and_reload(tmp_path):
    from hyperplane.combinatorics import BoltzmannTables

    code = run(["--output", str(tmp_path), "tables", "--lambda-ratio", "0.9", "--pmax", "8"])
    assert code == 0
    back = BoltzmannTables.from_json((tmp_path / "boltzmann_tables.json").read_text())
    assert back.p_max == 8


def test_peel_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    tail = ["peel", "--lambda-ratio", "0.9", "--rmax", "4", "--replicas", "3"]
    assert run(["--output", str(a), "--seed", "7", "--threads", "1"] + tail) == 0
    assert run(["--output", str(b), "--seed", "7", "--threads", "1"] + tail) == 0
    for k in range(3):
        fa = (a / f"trace_{k:04d}.csv").read_bytes()
        fb = (b / f"trace_{k:04d}.csv").read_bytes()
        assert fa == fb
    meta = json.loads((a / "meta.json").read_text())
    assert meta["replicas"] == 3


def test_seed_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("HYPERPLANE_SEED", "123")
    from hyperplane.cli import build_parser

    args = build_parser().parse_args(["validate", "--quick"])
    assert args.seed == 123


def test_build_map_oracle(tmp_path):
    code = run(["--output", str(tmp_path), "--seed", "3", "build-map",
                "--lambda-ratio", "0.9", "--rmax", "3", "--replicas", "2"])
    assert code == 0
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["oracle_failures"] == 0
    assert (tmp_path / "map_0000.txt").read_text().startswith("root ")


def test_validate_quick(tmp_path):
    code = run(["--output", str(tmp_path), "validate", "--quick"])
    assert code == 0
    reports = json.loads((tmp_path / "validation_reports.json").read_text())
    names = {r["name"] for r in reports}
    assert "markov_recurrence" in names
    assert all(r["passed"] for r in reports)


def test_bridge_small(tmp_path):
    code = run(["--output", str(tmp_path), "--seed", "5", "bridge",
                "--n", "5,7", "--r", "0.4", "--replicas", "80"])
    data = (tmp_path / "bridge_discrepancies.csv").read_text().splitlines()
    assert data[0].startswith("n,perimeter_discrepancy")
    assert len(data) == 3


def test_continuum_outputs(tmp_path):
    code = run(["--output", str(tmp_path), "--seed", "2", "continuum",
                "--horizon", "1.0", "--replicas", "5"])
    assert code == 0
    assert (tmp_path / "levy_path.csv").exists()
    pv = (tmp_path / "pv_terminals.csv").read_text().splitlines()
    assert pv[0] == "P_T,V_T"
    assert len(pv) == 6
    tt = (tmp_path / "transform_table.csv").read_text().splitlines()
    assert tt[0] == "r,lambda,mu,transform_value"


def test_conflicting_weight_flags(tmp_path):
    with pytest.raises(SystemExit):
        run(["--output", str(tmp_path), "peel", "--lambda-ratio", "0.9",
             "--n", "8", "--rmax", "2"])


def test_unknown_flag_usage_error(tmp_path):
    with pytest.raises(SystemExit):
        run(["--output", str(tmp_path), "peel", "--nope", "1"])
