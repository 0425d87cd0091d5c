import json

import numpy as np
import pytest

from maxrep import io
from maxrep.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert run("simulate", "--model", "m3", "--shape", "gaussian:beta=1", "--grid", "-5:5:0.25",
               "--margin", 4, "--reps", 300, "--seed", 3, "--events", "--out", d) == 0
    return d


def test_simulate_writes_manifest(sim_dir):
    man = io.RunManifest.read(sim_dir)
    assert man.seed == 3 and man.command == "simulate"
    assert man.counters["replicates"] == 300 and man.counters["approximate"] == 0
    assert "rep-0.csv" in man.outputs and "rep-0-events.json" in man.outputs
    assert man.config["grid"] == "-5:5:0.25"
    recs = json.loads((sim_dir / "rep-0-events.json").read_text())
    assert all("u" in r for r in recs)


def test_pipeline_shapes(sim_dir, tmp_path):
    ex = tmp_path / "ex"
    assert run("extract", "--input", sim_dir, "--mode", "shapes", "--Q=-1:1", "--L", 2,
               "--K=-2:2:0.25", "--threshold", "quantile:0.5", "--out", ex) == 0
    ev = io.read_event_set(ex)
    assert len(ev) > 50 and np.all(ev.samples[:, 8] == 1.0)
    fit = tmp_path / "fit"
    assert run("estimate", "--input", ex, "--estimator", "shape-ls", "--out", fit) == 0
    beta = json.loads((fit / "result.json").read_text())["estimate"]
    assert 0.7 < beta < 1.3
    rows = (fit / "shape_fit.csv").read_text().splitlines()
    assert rows[0] == "t,mean,fitted" and len(rows) == 18
    vg = tmp_path / "vg"
    assert run("estimate", "--input", ex, "--estimator", "variogram-theta", "--lags", "0,0.5",
               "--inner=-1:1", "--out", vg) == 0
    lines = (vg / "variogram.csv").read_text().splitlines()
    assert lines[0] == "h,theta,gamma,clamped" and lines[1].startswith("0.0,1.0,0.0")


def test_logistic_pipeline(tmp_path):
    s, e, m = tmp_path / "s", tmp_path / "e", tmp_path / "m"
    assert run("simulate", "--model", "logistic", "--q", 2, "--k", 1, "--reps", 400,
               "--seed", 1, "--out", s) == 0
    assert run("extract", "--input", s, "--t0", 0, "--threshold", "quantile:0.8", "--out", e) == 0
    assert run("estimate", "--input", e, "--estimator", "logistic-mle", "--out", m) == 0
    q = json.loads((m / "result.json").read_text())["estimate"]
    assert 1.2 < q < 4


def test_same_seed_same_bytes(tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        assert run("switch", "--direction", "m3-to-v", "--shape", "exponential:beta=1",
                   "--grid=-1:1:0.5", "--density", "gaussian:scale=2", "--n", 5, "--seed", 9, "--out", d) == 0
        outs.append({p.name: p.read_bytes() for p in d.iterdir() if p.name != "manifest.json"})
    assert outs[0] == outs[1] and len(outs[0]) == 5


def test_config_replay(sim_dir, tmp_path):
    d = tmp_path / "replay"
    small = tmp_path / "cfg.json"
    cfg = io.RunManifest.read(sim_dir).config
    cfg["reps"] = 2
    small.write_text(json.dumps(cfg))
    assert run("simulate", "--config", small, "--out", d) == 0
    assert (d / "rep-1.csv").read_bytes() == (sim_dir / "rep-1.csv").read_bytes()


def test_inc_to_m3_switch(tmp_path):
    d = tmp_path / "sw"
    assert run("switch", "--direction", "inc-to-m3", "--variogram", "fbm:alpha=2", "--grid=-3:3:0.25",
               "--t0", 0, "--n", 300, "--seed", 2, "--out", d) == 0
    man = io.RunManifest.read(d)
    assert 0.3 < man.info["c"] < 0.5
    assert man.counters["drawn"] == 300
    assert 0 <= man.counters["boundary_ratio"] < 1


@pytest.mark.parametrize("argv,code", [
    (["simulate", "--model", "m3", "--shape", "gaussian:beta=1", "--grid", "0:1:1"], 2),  # no seed
    (["simulate", "--model", "m3", "--shape", "gaussain", "--grid", "0:1:1", "--seed", 1], 2),
    (["simulate", "--model", "m3", "--shape", "gaussian:beta=1", "--grid", "0:1", "--seed", 1], 2),
    (["extract", "--input", "/nonexistent/dir"], 2),
    (["estimate", "--estimator", "logistic-mle"], 2),
    (["bogus"], 2),
])
def test_usage_errors(tmp_path, argv, code, capsys):
    assert run(*argv, "--out", tmp_path / "x") == code
    assert "error" in capsys.readouterr().err


def test_refuses_used_output_dir(sim_dir):
    assert run("simulate", "--model", "logistic", "--q", 2, "--k", 1, "--seed", 1, "--out", sim_dir) == 2


def test_selfcheck(capsys):
    assert run("selfcheck") == 0
    out = capsys.readouterr().out.splitlines()
    assert out and all(line.startswith("PASS") for line in out)
