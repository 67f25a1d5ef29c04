import json
import subprocess
import sys

import numpy as np
import pytest

from figlearn import files, graph
from figlearn.cli import main, parse_bench_config
from figlearn.learn import LearnConfig

FAST = ["--rounds", "2", "--filter-steps", "20", "--graph-steps", "20"]


@pytest.fixture(autouse=True)
def _no_env_seed(monkeypatch):
    monkeypatch.delenv("FIGLEARN_SEED", raising=False)
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)


def generate(tmp_path, name="d", *extra):
    prefix = str(tmp_path / name)
    assert main(["generate", "--nodes", "8", "--p-in", "0.6", "--signals", "60", "--seed", "3",
                 "--out-prefix", prefix, *extra]) == 0
    return prefix


def test_generate_defaults_and_complete(tmp_path):
    prefix = str(tmp_path / "x")
    assert main(["generate", "--seed", "1", "--out-prefix", prefix]) == 0
    nodes, X = files.read_signals(prefix + ".signals.csv")
    assert X.shape == (500, 30) and len(nodes) == 30
    assert main(["generate", "--nodes", "6", "--p-in", "1", "--p-out", "1", "--signals", "5",
                 "--seed", "1", "--out-prefix", prefix]) == 0
    assert files.read_graph(prefix + ".graph.csv").sum() == 15


def test_generate_deterministic(tmp_path):
    a = generate(tmp_path, "a", "--observe-fraction", "0.25")
    b = generate(tmp_path, "b", "--observe-fraction", "0.25")
    for suffix in (".graph.csv", ".signals.csv", ".truth.csv", ".observed.csv"):
        assert open(a + suffix, "rb").read() == open(b + suffix, "rb").read()
    _, obs = files.read_signals(a + ".observed.csv", allow_missing=True)
    assert np.all((~np.isnan(obs)).sum(axis=1) == 2)


def test_seed_required(tmp_path, monkeypatch, capsys):
    assert main(["generate", "--out-prefix", str(tmp_path / "x")]) == 2
    assert "FIGLEARN_SEED" in capsys.readouterr().err
    monkeypatch.setenv("FIGLEARN_SEED", "4")
    assert main(["generate", "--nodes", "5", "--signals", "3", "--out-prefix", str(tmp_path / "x")]) == 0
    assert "# seed=4" in (tmp_path / "x.signals.csv").read_text()


def test_learn_round_trip_and_determinism(tmp_path, capsys):
    d = generate(tmp_path)
    outs = []
    for k in range(2):
        out = tmp_path / f"m{k}.json"
        assert main(["learn", d + ".signals.csv", "--out", str(out), "--seed", "7",
                     "--graph-out", str(tmp_path / f"g{k}.csv"), *FAST]) == 0
        outs.append(out)
    assert "final_loss=" in capsys.readouterr().out
    assert outs[0].read_bytes() == outs[1].read_bytes()
    assert (tmp_path / "m0.trace.csv").read_bytes() == (tmp_path / "m1.trace.csv").read_bytes()
    assert (tmp_path / "g0.csv").read_bytes() == (tmp_path / "g1.csv").read_bytes()
    m, nodes, prov = files.read_model(outs[0])
    files.write_model(tmp_path / "again.json", m, nodes, prov)
    assert (tmp_path / "again.json").read_bytes() == outs[0].read_bytes()
    assert json.loads(outs[0].read_text())["seed"] == 7


def test_learn_known_graph_recovers_heat(tmp_path):
    prefix = str(tmp_path / "k")
    assert main(["generate", "--nodes", "10", "--p-in", "0.5", "--signals", "500", "--seed", "2",
                 "--out-prefix", prefix]) == 0
    assert main(["learn", prefix + ".signals.csv", "--known-graph", prefix + ".graph.csv",
                 "--out", str(tmp_path / "m.json"), "--filter-out", str(tmp_path / "h.csv"),
                 "--rounds", "1", "--filter-steps", "3000", "--seed", "1"]) == 0
    _, tab = files.read_signals(tmp_path / "h.csv")
    lam, h = tab[:, 0], tab[:, 1]
    assert np.max(np.abs(h - np.exp(-0.1 * lam))) <= 0.05


def test_learn_known_filter(tmp_path):
    d = generate(tmp_path)
    assert main(["learn", d + ".signals.csv", "--known-filter", "heat", "--out",
                 str(tmp_path / "m.json"), "--seed", "1", *FAST]) == 0
    m, _, _ = files.read_model(tmp_path / "m.json")
    assert m.filter.to_dict()["kind"] == "heat"


def test_learn_parse_error_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n1,oops\n")
    assert main(["learn", str(p), "--out", str(tmp_path / "m.json"), "--seed", "1"]) == 2
    assert ":3:" in capsys.readouterr().err


def test_learn_numerical_failure_exit_3(tmp_path, capsys):
    p = tmp_path / "huge.csv"
    rng = np.random.default_rng(0)
    files.write_signals(p, rng.standard_normal((20, 4)) * 1e300)
    assert main(["learn", str(p), "--out", str(tmp_path / "m.json"), "--seed", "1", *FAST]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_infer_cli(tmp_path, capsys):
    d = generate(tmp_path, "d", "--observe-fraction", "0.5", "--test-signals", "4")
    model = str(tmp_path / "m.json")
    assert main(["learn", d + ".signals.csv", "--out", model, "--seed", "1", *FAST]) == 0
    out1, out2 = tmp_path / "c1.csv", tmp_path / "c2.csv"
    for out in (out1, out2):
        assert main(["infer", model, d + ".observed.csv", "--truth", d + ".truth.csv", "--out", str(out),
                     "--seed", "5", "--steps", "300"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert "mean_hidden_mse" in capsys.readouterr().out
    lines = [l for l in out1.read_text().splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    assert header[-5:] == ["fit_mse", "hidden_mse", "n_observed", "status", "inferred_mask"]
    assert len(lines) == 5 and all(",ok," in l for l in lines[1:])


def test_infer_fully_observed_and_bad_rows(tmp_path):
    d = generate(tmp_path)
    model = str(tmp_path / "m.json")
    assert main(["learn", d + ".signals.csv", "--out", model, "--seed", "1", *FAST]) == 0
    _, X = files.read_signals(d + ".signals.csv")
    obs = X[:3].copy()
    obs[1] = np.nan
    files.write_signals(tmp_path / "o.csv", obs)
    assert main(["infer", model, str(tmp_path / "o.csv"), "--out", str(tmp_path / "c.csv"), "--seed", "1"]) == 0
    rows = [l.split(",") for l in (tmp_path / "c.csv").read_text().splitlines() if not l.startswith("#")]
    assert rows[2][-2].startswith("error") and rows[1][-2] == rows[3][-2] == "ok"
    fit_col = rows[0].index("fit_mse")
    assert float(rows[1][fit_col]) <= 1e-6


def test_infer_identifier_mismatch(tmp_path):
    d = generate(tmp_path)
    model = str(tmp_path / "m.json")
    assert main(["learn", d + ".signals.csv", "--out", model, "--seed", "1", *FAST]) == 0
    files.write_signals(tmp_path / "o.csv", np.zeros((1, 8)), [f"v{i}" for i in range(8)])
    assert main(["infer", model, str(tmp_path / "o.csv"), "--out", str(tmp_path / "c.csv"), "--seed", "1"]) == 2


def test_eval(tmp_path, capsys):
    t, l = tmp_path / "t.csv", tmp_path / "l.csv"
    files.write_graph(t, np.array([1, 1, 1, 1, 0, 0], float))
    files.write_graph(l, np.array([1, 1, 0, 0, 1, 0], float))
    assert main(["eval", "--true", str(t), "--learned", str(t)]) == 0
    assert capsys.readouterr().out.startswith("f1=1.0 ")
    assert main(["eval", "--true", str(t), "--learned", str(l)]) == 0
    out = capsys.readouterr().out
    assert "tp=2 fp=1 fn=2 tn=1" in out and "accuracy=0.5" in out
    files.write_graph(l, np.zeros(3))
    assert main(["eval", "--true", str(t), "--learned", str(l)]) == 2


def bench_config(tmp_path, **over):
    cfg = {"master_seed": 2, "repeats": 1, "signals": 40,
           "cells": [{"n": 6, "p_in": 0.6, "filter": "heat"}, {"n": 6, "p_in": 0.6, "filter": "highpass"}],
           "learn": {"rounds": 1, "filter_steps_per_round": 10, "graph_steps_per_round": 10}}
    cfg.update(over)
    p = tmp_path / "bench.json"
    p.write_text(json.dumps(cfg))
    return p


def test_benchmark_cli(tmp_path):
    p = bench_config(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["benchmark", str(p), "--out", str(a)]) == 0
    assert main(["benchmark", str(p), "--out", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = [l for l in a.read_text().splitlines() if not l.startswith("#")]
    assert len(lines) == 1 + 2 + 2
    assert "aggregate ok=1 failed=0" in lines[-1]
    assert "# master_seed=2" in a.read_text()


def test_benchmark_config_errors(tmp_path, capsys):
    p = bench_config(tmp_path, bogus=1, repeats=0)
    assert main(["benchmark", str(p), "--out", str(tmp_path / "r.csv")]) == 2
    err = capsys.readouterr().err
    assert "bogus" in err and "repeats" in err
    p = bench_config(tmp_path, cells=[{"n": 60, "filter": "heat"}])
    assert main(["benchmark", str(p), "--out", str(tmp_path / "r.csv")]) == 2
    assert "--allow-large" in capsys.readouterr().err


def test_entry_point_runs(tmp_path):
    r = subprocess.run([sys.executable, "-m", "figlearn.cli", "generate", "--nodes", "4", "--signals", "2",
                        "--seed", "0", "--out-prefix", str(tmp_path / "e")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr


def test_full_grid_preset():
    cells, cfg = parse_bench_config({"preset": "full-grid", "master_seed": 0})
    assert len(cells) == 9 and cfg == LearnConfig()
