from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from gridcascade.cli import main
from gridcascade.generators import fixture
from gridcascade.grid import save_instance


@pytest.fixture
def obs61(tmp_path):
    path = tmp_path / "obs61.json"
    save_instance(fixture("obs61"), path)
    return path


def run(*argv):
    return main([str(a) for a in argv])


def read_json(path):
    return json.loads(path.read_text())


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestSolve:
    def test_obs61(self, obs61, tmp_path):
        out = tmp_path / "flows.json"
        assert run("solve", "--input", obs61, "--output", out, "--no-timestamp") == 0
        doc = read_json(out)
        assert doc["flows"]["0"] == pytest.approx(910 / 43)
        assert doc["feasible"] is True and "timestamp" not in doc

    def test_imbalanced(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"buses": [{"id": 0, "power": 2}, {"id": 1, "power": -1}], "lines": [{"id": 0, "u": 0, "v": 1, "reactance": 1, "capacity": 5}]}))
        assert run("solve", "--input", path) == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "ImbalanceError" and err["exit_code"] == 2
        out = tmp_path / "flows.json"
        assert run("solve", "--input", path, "--shed", "--output", out) == 0
        assert read_json(out)["flows"]["0"] == pytest.approx(1.0)

    def test_missing_input(self, tmp_path):
        assert run("solve", "--input", tmp_path / "nope.json") == 2


class TestCascade:
    def test_engines_identical_files(self, obs61, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run("cascade", "--input", obs61, "--f0", "0", "--engine", "cfe", "--output", a, "--no-timestamp") == 0
        assert run("cascade", "--input", obs61, "--f0", "0", "--engine", "cfe-pb", "--output", b, "--no-timestamp") == 0
        da, db = read_json(a), read_json(b)
        da["trace"].pop("engine")
        db["trace"].pop("engine")
        assert da == db
        assert da["trace"]["rounds"] == [[0], [3, 4], [1]]

    def test_rerun_byte_identical(self, obs61, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for path in (a, b):
            run("cascade", "--input", obs61, "--f0", "0", "--output", path, "--no-timestamp")
        assert a.read_bytes() == b.read_bytes()

    def test_obs62_metrics(self, tmp_path):
        path = tmp_path / "g.json"
        save_instance(fixture("obs62", m=4), path)
        out = tmp_path / "t.json"
        assert run("cascade", "--input", path, "--f0", "0", "--output", out) == 0
        m = read_json(out)["metrics"]
        assert (m["rounds"], m["failures"], m["yield"]) == (3, 4, 0.0)
        assert "timestamp" in read_json(out)

    def test_unknown_line(self, obs61):
        assert run("cascade", "--input", obs61, "--f0", "9") == 2

    def test_metrics_from_saved_trace(self, obs61, tmp_path):
        trace, out = tmp_path / "t.json", tmp_path / "m.csv"
        run("cascade", "--input", obs61, "--f0", "0", "--output", trace)
        assert run("metrics", "--input", obs61, "--trace", trace, "--output", out) == 0
        row = read_csv(out)[0]
        assert float(row["yield"]) == 0.0 and int(row["rounds"]) == 2 and int(row["failures"]) == 4


class TestAttack:
    def test_brute_force(self, obs61, tmp_path):
        out, trace = tmp_path / "a.json", tmp_path / "t.json"
        assert run("attack", "--input", obs61, "--method", "brute_force", "--k", "2", "--output", out, "--trace", trace) == 0
        doc = read_json(out)
        assert doc["chosen"] == [0] and doc["yield"] == 0.0 and doc["trace"] == str(trace)
        assert read_json(trace)["trace"]["rounds"][0] == [0]

    def test_cap(self, obs61):
        assert run("attack", "--input", obs61, "--method", "brute_force", "--k", "2", "--cap", "3") == 4

    def test_mves(self, obs61, tmp_path):
        out = tmp_path / "a.json"
        assert run("attack", "--input", obs61, "--output", out) == 0
        assert read_json(out)["method"] == "mves_rb"


class TestGenerate:
    def test_fixture(self, tmp_path):
        out = tmp_path / "g.json"
        assert run("generate", "--fixture", "obs62", "--param", "m=5", "--output", out, "--no-timestamp") == 0
        doc = read_json(out)
        assert len(doc["lines"]) == 5 and doc["meta"]["m"] == 5

    def test_bad_param(self, tmp_path):
        assert run("generate", "--fixture", "obs62", "--param", "m=1") == 2

    def test_ensemble_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for path in (a, b):
            assert run("generate", "--ensemble", "ws", "--n", "30", "--seed", "4", "--output", path, "--no-timestamp") == 0
        assert a.read_bytes() == b.read_bytes()
        assert read_json(a)["meta"]["model"] == "ws"


class TestBench:
    def test_rows(self, tmp_path):
        out = tmp_path / "b.csv"
        argv = ["bench", "--ensemble", "er", "--n", "30,40", "--p", "0.3", "--fos", "1.05,1.5", "--trials", "3", "--output", out]
        assert run(*argv) == 0
        rows = read_csv(out)
        assert len(rows) == 4
        assert {(r["n"], r["fos"]) for r in rows} == {("30", "1.05"), ("30", "1.5"), ("40", "1.05"), ("40", "1.5")}
        assert all(float(r["speedup"]) > 0 for r in rows)

    def test_min_trials(self):
        assert run("bench", "--n", "20", "--p", "0.3", "--trials", "2") == 2


def test_figdata(tmp_path):
    out = tmp_path / "fig"
    argv = ["figdata", "--ensemble", "er", "--n", "20", "--p", "0.3", "--trials", "3", "--k", "2", "--draws", "2", "--output", out]
    assert run(*argv) == 0
    pairs = read_csv(out / "single_failure.csv")
    assert set(pairs[0]) == {"graph", "seed", "e", "e_failed", "d", "r", "S", "M"}
    assert read_csv(out / "node_distances.csv")
    methods = {r["method"] for r in read_csv(out / "attack_comparison.csv")}
    assert methods == {"mves_rb", "random", "brute_force"}


def test_console_entry_point(obs61):
    proc = subprocess.run(
        [sys.executable, "-m", "gridcascade.cli", "cascade", "--input", str(obs61), "--f0", "0", "--no-timestamp"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["metrics"]["yield"] == 0.0


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit):
        main(["bench", "--help"])
    assert "default 1.05" in capsys.readouterr().out
