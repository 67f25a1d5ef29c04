"""Command-line interface.

Exit codes: 0 success, 2 bad input or configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import graph
from .bench import BenchCell, RESULT_COLUMNS, derive_seed, paired_grid, result_meta, run_benchmark
from .errors import NumericalError, ValidationError
from .files import (NA, read_graph, read_model, read_signals, write_graph, write_model, write_signals,
                    write_table, write_trace)
from .filters import ReferenceFilter
from .inference import InferenceConfig, infer_missing
from .learn import LearnConfig, fit
from .synthetic import RNG_DESCRIPTION, SbmSpec, edge_metrics, filter_operator, generate_sbm, generate_signals

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
SEED_ENV = "FIGLEARN_SEED"


def resolve_seed(seed):
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        raise ValidationError(f"no seed given: pass --seed or set {SEED_ENV}")
    try:
        return int(env)
    except ValueError:
        raise ValidationError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _threshold(text):
    if text is None or text == "auto":
        return None
    try:
        t = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("threshold must be a number or 'auto'") from None
    return t


def cmd_learn(args) -> int:
    seed = resolve_seed(args.seed)
    cfg = LearnConfig(rounds=args.rounds, filter_steps_per_round=args.filter_steps,
                      graph_steps_per_round=args.graph_steps, lr_filter=args.lr_filter,
                      lr_graph=args.lr_graph, stop_rel_tol=args.stop_tol, seed=seed)
    nodes, X = read_signals(args.signals)
    known_graph = known_filter = None
    if args.known_graph:
        w = read_graph(args.known_graph)
        if graph.nodes_from_pairs(w.shape[0]) != len(nodes):
            raise ValidationError(f"known graph has {graph.nodes_from_pairs(w.shape[0])} nodes, "
                                  f"signals have {len(nodes)}")
        known_graph = graph.weights_to_laplacian(w)
    if args.known_filter:
        known_filter = ReferenceFilter.parse(args.known_filter)
    model = fit(X, cfg, known_graph=known_graph, known_filter=known_filter)

    out = Path(args.out)
    write_model(out, model, nodes)
    meta = {"seed": seed, "config": cfg.to_dict(), "signals": str(args.signals)}
    trace = Path(args.trace) if args.trace else out.with_suffix(".trace.csv")
    write_trace(trace, model, meta)
    if args.graph_out:
        write_graph(args.graph_out, model.binary_weights(args.threshold), model.n,
                    {**meta, "threshold": model.edge_threshold() if args.threshold is None else args.threshold})
    if args.filter_out:
        lam, h = model.filter_values()
        write_table(args.filter_out, ["lambda", "h"], [{"lambda": a, "h": b} for a, b in zip(lam, h)], meta)
    thr = model.edge_threshold() if args.threshold is None else args.threshold
    print(f"final_loss={model.final_loss!r} rounds={model.rounds_run} "
          f"edges@0.5={int(model.binary_weights(0.5).sum())} "
          f"edges@{thr:.4g}={int(model.binary_weights(thr).sum())} model={out}")
    return EXIT_OK


def cmd_infer(args) -> int:
    seed = resolve_seed(args.seed)
    model, model_nodes, _ = read_model(args.model)
    nodes, Y = read_signals(args.observations, allow_missing=True)
    if list(nodes) != list(model_nodes):
        raise ValidationError("observation columns do not match the model's node identifiers")
    truth = None
    if args.truth:
        tnodes, truth = read_signals(args.truth)
        if list(tnodes) != list(nodes) or truth.shape != Y.shape:
            raise ValidationError("truth file does not match the observations")
    H = model.filter_operator()
    columns = list(nodes) + ["fit_mse"] + (["hidden_mse"] if truth is not None else []) + [
        "n_observed", "status", "inferred_mask"]
    rows = []
    for k, y in enumerate(Y):
        row = {"n_observed": int(np.sum(~np.isnan(y)))}
        mask = "".join("1" if np.isnan(v) else "0" for v in y)
        try:
            cfg = InferenceConfig(steps=args.steps, learning_rate=args.lr, seed=derive_seed(seed, k),
                                  init_scale=args.init_scale)
            res = infer_missing(H, y, cfg)
        except ValidationError as exc:
            row.update(status=f"error: {exc}".replace(",", ";"), inferred_mask=mask)
            rows.append(row)
            continue
        row.update(zip(nodes, res.completed))
        row.update(fit_mse=res.fit_mse, status="ok", inferred_mask=mask)
        if truth is not None:
            row["hidden_mse"] = res.hidden_mse(truth[k])
        rows.append(row)
    meta = {"seed": seed, "steps": args.steps, "lr": args.lr, "init_scale": args.init_scale,
            "model": str(args.model)}
    write_table(args.out, columns, rows, meta)
    ok = [r for r in rows if r["status"] == "ok"]
    msg = f"rows={len(rows)} ok={len(ok)}"
    if truth is not None and ok:
        hm = [r["hidden_mse"] for r in ok if not np.isnan(r["hidden_mse"])]
        if hm:
            msg += f" mean_hidden_mse={float(np.mean(hm))!r}"
    print(msg)
    return EXIT_OK


def cmd_generate(args) -> int:
    seed = resolve_seed(args.seed)
    f = ReferenceFilter.parse(args.filter)
    spec = SbmSpec(args.nodes, args.clusters, args.p_in, args.p_out, seed=derive_seed(seed, 0))
    w = generate_sbm(spec)
    L = graph.weights_to_laplacian(w, args.nodes)
    X = generate_signals(L, f, args.signals, derive_seed(seed, 1))
    meta = {"seed": seed, "nodes": args.nodes, "clusters": args.clusters, "p_in": args.p_in,
            "p_out": args.p_out, "filter": str(f), "signals": args.signals, "rng": RNG_DESCRIPTION}
    prefix = args.out_prefix
    write_graph(f"{prefix}.graph.csv", w, args.nodes, meta)
    write_signals(f"{prefix}.signals.csv", X, meta=meta)
    written = [f"{prefix}.graph.csv", f"{prefix}.signals.csv"]
    if args.observe_fraction is not None:
        if not 0 < args.observe_fraction <= 1:
            raise ValidationError("--observe-fraction must lie in (0, 1]")
        rng = np.random.default_rng(derive_seed(seed, 3))
        H = filter_operator(L, f)
        T = rng.standard_normal((args.test_signals, args.nodes)) @ H
        k = max(1, int(round(args.observe_fraction * args.nodes)))
        obs = np.full(T.shape, np.nan)
        for r in range(T.shape[0]):
            idx = rng.choice(args.nodes, size=k, replace=False)
            obs[r, idx] = T[r, idx]
        tmeta = {**meta, "observe_fraction": args.observe_fraction, "test_signals": args.test_signals}
        write_signals(f"{prefix}.truth.csv", T, meta=tmeta)
        write_signals(f"{prefix}.observed.csv", obs, meta=tmeta)
        written += [f"{prefix}.truth.csv", f"{prefix}.observed.csv"]
    print(f"edges={int(w.sum())} wrote " + " ".join(written))
    return EXIT_OK


BENCH_KEYS = {"master_seed", "repeats", "signals", "cells", "preset", "learn"}
CELL_KEYS = {"n", "clusters", "p_in", "p_out", "filter"}
LEARN_KEYS = {"rounds", "filter_steps_per_round", "graph_steps_per_round", "lr_filter", "lr_graph",
              "stop_rel_tol", "degenerate_eig_tol", "phase_order"}
LARGE_NODES = 50
LARGE_REPEATS = 10


def parse_bench_config(d: dict):
    """Validate a benchmark config; raise listing every offending key."""
    bad = []
    if not isinstance(d, dict):
        raise ValidationError("benchmark config must be a JSON object")
    bad += [f"unknown key '{k}'" for k in d if k not in BENCH_KEYS]
    if ("cells" in d) == ("preset" in d):
        bad.append("exactly one of 'cells' and 'preset' is required")
    if "preset" in d and d["preset"] != "full-grid":
        bad.append("'preset' must be 'full-grid'")
    for k in ("repeats", "signals", "master_seed"):
        if k in d and (not isinstance(d[k], int) or isinstance(d[k], bool) or d[k] < (0 if k == "master_seed" else 1)):
            bad.append(f"'{k}' must be a {'nonnegative' if k == 'master_seed' else 'positive'} integer")
    learn = d.get("learn", {})
    if not isinstance(learn, dict):
        bad.append("'learn' must be an object")
        learn = {}
    bad += [f"unknown key 'learn.{k}'" for k in learn if k not in LEARN_KEYS]
    cells = []
    for i, c in enumerate(d.get("cells", []) if isinstance(d.get("cells", []), list) else []):
        if not isinstance(c, dict):
            bad.append(f"cells[{i}] must be an object")
            continue
        bad += [f"unknown key 'cells[{i}].{k}'" for k in c if k not in CELL_KEYS]
        bad += [f"missing key 'cells[{i}].{k}'" for k in ("n", "filter") if k not in c]
        try:
            cells.append(BenchCell(SbmSpec(c["n"], c.get("clusters", 2), c.get("p_in", 0.3), c.get("p_out", 0.1)),
                                   ReferenceFilter.parse(c["filter"])))
        except (KeyError, TypeError, ValidationError) as exc:
            bad.append(f"cells[{i}]: {exc}")
    if "cells" in d and not isinstance(d["cells"], list):
        bad.append("'cells' must be a list")
    if bad:
        raise ValidationError("invalid benchmark config: " + "; ".join(bad))
    try:
        cfg = LearnConfig(**{k: v for k, v in learn.items()})
    except (TypeError, ValidationError) as exc:
        raise ValidationError(f"invalid benchmark config: learn: {exc}") from None
    if d.get("preset") == "full-grid":
        cells = paired_grid()
    return cells, cfg


def cmd_benchmark(args) -> int:
    try:
        d = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"{args.config}: cannot open: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{args.config}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    cells, cfg = parse_bench_config(d)
    master = d["master_seed"] if "master_seed" in d else resolve_seed(None)
    repeats = d.get("repeats", 1)
    n_signals = d.get("signals", 500)
    large = repeats > LARGE_REPEATS or any(c.sbm.n > LARGE_NODES for c in cells)
    if large and not args.allow_large:
        raise ValidationError("config describes a large grid; pass --allow-large to run it")
    result = run_benchmark(cells, repeats, cfg, n_signals, master, jobs=args.jobs,
                           record_timing=args.record_timing)
    write_table(args.out, RESULT_COLUMNS, result.rows + result.aggregates,
                result_meta(master, repeats, n_signals, cfg))
    for a in result.aggregates:
        print(f"{a['filter']}: mean_f1={a['f1']!r} {a['status']}")
    return EXIT_OK


def cmd_eval(args) -> int:
    true_w = read_graph(args.true)
    if str(args.learned).endswith(".json"):
        model, _, _ = read_model(args.learned)
        learned = model.binary_weights(args.threshold)
    else:
        learned = graph.binarize(read_graph(args.learned), 0.5 if args.threshold is None else args.threshold)
    if learned.shape != true_w.shape:
        raise ValidationError("graphs have different node counts")
    m = edge_metrics(true_w, learned)
    print(" ".join(f"{k}={v!r}" for k, v in m.as_dict().items()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="figlearn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    d = LearnConfig()

    s = sub.add_parser("learn", help="learn a graph and/or filter from a signals CSV")
    s.add_argument("signals")
    s.add_argument("--out", required=True, help="model JSON path")
    s.add_argument("--trace", help="loss-trace CSV (default: <out>.trace.csv)")
    s.add_argument("--graph-out", help="write the binarized learned graph here")
    s.add_argument("--filter-out", help="write (lambda, h) at the learned spectrum here")
    s.add_argument("--threshold", type=_threshold, default=None, help="edge threshold or 'auto'")
    s.add_argument("--rounds", type=int, default=d.rounds)
    s.add_argument("--filter-steps", type=int, default=d.filter_steps_per_round)
    s.add_argument("--graph-steps", type=int, default=d.graph_steps_per_round)
    s.add_argument("--lr-filter", type=float, default=d.lr_filter)
    s.add_argument("--lr-graph", type=float, default=d.lr_graph)
    s.add_argument("--stop-tol", type=float, default=d.stop_rel_tol)
    s.add_argument("--seed", type=int)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--known-graph", help="edge-list CSV; learn only the filter")
    g.add_argument("--known-filter", help="heat[:s] | normal | highpass[:s]; learn only the graph")
    s.set_defaults(func=cmd_learn)

    s = sub.add_parser("infer", help="fill missing (NA) entries using a learned model")
    s.add_argument("model")
    s.add_argument("observations")
    s.add_argument("--out", required=True)
    s.add_argument("--truth", help="complete signals CSV, for hidden-entry MSE")
    s.add_argument("--steps", type=int, default=InferenceConfig.steps)
    s.add_argument("--lr", type=float, default=InferenceConfig.learning_rate)
    s.add_argument("--init-scale", type=float, default=InferenceConfig.init_scale)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("generate", help="generate an SBM graph and filtered signals")
    s.add_argument("--nodes", type=int, default=30)
    s.add_argument("--clusters", type=int, default=2)
    s.add_argument("--p-in", type=float, default=0.3)
    s.add_argument("--p-out", type=float, default=0.1)
    s.add_argument("--filter", default="heat")
    s.add_argument("--signals", type=int, default=500)
    s.add_argument("--observe-fraction", type=float,
                   help="also write held-out test signals with only this fraction of entries kept")
    s.add_argument("--test-signals", type=int, default=20)
    s.add_argument("--seed", type=int)
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("benchmark", help="run a benchmark grid from a JSON config")
    s.add_argument("config")
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--allow-large", action="store_true", help="permit grids with n > 50 or > 10 repeats")
    s.add_argument("--record-timing", action="store_true",
                   help="fill wall_time_s (makes output differ between runs)")
    s.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("eval", help="edge metrics of a learned graph against the truth")
    s.add_argument("--true", required=True)
    s.add_argument("--learned", required=True, help="edge-list CSV or model JSON")
    s.add_argument("--threshold", type=_threshold, default=None)
    s.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
