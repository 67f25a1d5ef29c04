"""Benchmark grid: SBM graph -> filtered signals -> joint fit -> edge metrics.

Seeds: run ``r`` of cell ``c`` under master seed ``m`` has
``seed_run = m*10**6 + c*10**3 + r``. The graph of that run is drawn from
``m*10**6 + g*10**3 + r`` where ``g`` indexes the distinct SBM settings in
the grid, so cells that differ only in their filter see identical graphs.
Separate streams for the graph, the signals and the fit are split off these
integers with :func:`derive_seed`.
"""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import graph
from .filters import ReferenceFilter
from .learn import LearnConfig, fit
from .synthetic import RNG_DESCRIPTION, SbmSpec, edge_metrics, generate_sbm, generate_signals

RESULT_COLUMNS = [
    "n", "clusters", "p_in", "p_out", "filter", "repeat", "seed",
    "f1", "precision", "recall", "accuracy", "threshold", "f1_at_half",
    "final_loss", "rounds_run", "wall_time_s", "status",
]
METRICS = ("f1", "precision", "recall", "accuracy", "f1_at_half")


def run_seed(master: int, index: int, repeat: int) -> int:
    return master * 1_000_000 + index * 1_000 + repeat


def derive_seed(base: int, stream: int) -> int:
    return int(np.random.SeedSequence([base, stream]).generate_state(1, np.uint64)[0] >> 1)


@dataclass(frozen=True)
class BenchCell:
    sbm: SbmSpec
    filter: ReferenceFilter

    @property
    def graph_key(self):
        s = self.sbm
        return (s.n, s.num_clusters, s.p_within, s.p_between)


@dataclass(frozen=True)
class RunSpec:
    cell: BenchCell
    repeat: int
    seed: int
    graph_seed: int
    n_signals: int
    cfg: LearnConfig
    record_timing: bool = False


def run_one(spec: RunSpec) -> dict:
    """One benchmark run; failures become a row with an error status."""
    s = spec.cell.sbm
    row = {
        "n": s.n, "clusters": s.num_clusters, "p_in": s.p_within, "p_out": s.p_between,
        "filter": str(spec.cell.filter), "repeat": spec.repeat, "seed": spec.seed,
    }
    t0 = time.perf_counter()
    try:
        true_w = generate_sbm(replace(s, seed=derive_seed(spec.graph_seed, 0)))
        L = graph.weights_to_laplacian(true_w, s.n)
        X = generate_signals(L, spec.cell.filter, spec.n_signals, derive_seed(spec.seed, 1))
        model = fit(X, replace(spec.cfg, seed=derive_seed(spec.seed, 2)))
        thr = model.edge_threshold()
        m = edge_metrics(true_w, model.binary_weights(thr))
        row.update(
            f1=m.f1, precision=m.precision, recall=m.recall, accuracy=m.accuracy,
            threshold=thr, f1_at_half=edge_metrics(true_w, model.binary_weights(0.5)).f1,
            final_loss=model.final_loss, rounds_run=model.rounds_run, status="ok",
        )
    except Exception as exc:  # recorded, not raised: one bad run must not sink the grid
        row["status"] = "error: " + f"{type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
    if spec.record_timing:
        row["wall_time_s"] = round(time.perf_counter() - t0, 3)
    return row


def build_runs(cells, repeats: int, cfg: LearnConfig, n_signals: int = 500,
               master_seed: int = 0, record_timing: bool = False) -> list[RunSpec]:
    graph_index = {}
    runs = []
    for c, cell in enumerate(cells):
        g = graph_index.setdefault(cell.graph_key, len(graph_index))
        for r in range(repeats):
            runs.append(RunSpec(cell, r, run_seed(master_seed, c, r), run_seed(master_seed, g, r),
                                n_signals, cfg, record_timing))
    return runs


def aggregate(rows) -> list[dict]:
    """Per-filter means over successful runs."""
    out = []
    for name in dict.fromkeys(r["filter"] for r in rows):
        mine = [r for r in rows if r["filter"] == name]
        ok = [r for r in mine if r["status"] == "ok"]
        agg = {"filter": name, "repeat": "mean",
               "status": f"aggregate ok={len(ok)} failed={len(mine) - len(ok)}"}
        for k in METRICS + ("final_loss",):
            agg[k] = float(np.mean([r[k] for r in ok])) if ok else None
        out.append(agg)
    return out


@dataclass
class BenchmarkResult:
    rows: list
    aggregates: list

    def mean(self, filter_name: str, metric: str = "f1") -> float:
        """Aggregate ``metric`` of a filter, given as ``"heat"`` or ``"heat:0.1"``."""
        key = str(ReferenceFilter.parse(filter_name))
        for a in self.aggregates:
            if a["filter"] == key:
                return a[metric]
        raise KeyError(filter_name)


def run_benchmark(cells, repeats: int, cfg: LearnConfig, n_signals: int = 500, master_seed: int = 0,
                  jobs: int = 1, record_timing: bool = False) -> BenchmarkResult:
    runs = build_runs(cells, repeats, cfg, n_signals, master_seed, record_timing)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_one, runs))
    else:
        rows = [run_one(r) for r in runs]
    return BenchmarkResult(rows, aggregate(rows))


def paired_grid(filters=("heat", "normal", "highpass"), sizes=(30, 50, 70),
                p_within=(0.3, 0.5, 0.7), p_between: float = 0.1, clusters: int = 2) -> list[BenchCell]:
    """Sizes paired with within-cluster probabilities, crossed with filters."""
    cells = []
    for f in filters:
        for n, p in zip(sizes, p_within):
            cells.append(BenchCell(SbmSpec(n, clusters, p, p_between), ReferenceFilter.parse(f)))
    return cells


def result_meta(master_seed: int, repeats: int, n_signals: int, cfg: LearnConfig) -> dict:
    return {"master_seed": master_seed, "repeats": repeats, "signals": n_signals,
            "learn_config": cfg.to_dict(), "rng": RNG_DESCRIPTION}
