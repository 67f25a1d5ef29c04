"""Readers and writers for signal CSVs, edge-list graphs and model JSON.

All writers use ``\\n`` line endings and the shortest round-trip
representation of floats (``repr``), so write -> read -> write is
byte-identical. Lines starting with ``#`` are comments; writers use them to
embed the seed and configuration that produced a file.
"""
from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np

from . import __version__, graph
from .errors import FileFormatError, ValidationError
from .filters import FilterNetwork, filter_from_dict
from .learn import LearnConfig, LearnedModel

NA = "NA"
MODEL_FORMAT_VERSION = 1


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return NA
    return repr(x)


def comment_lines(meta: dict | None) -> list[str]:
    if not meta:
        return []
    return [f"# {k}={json.dumps(v, sort_keys=True, separators=(',', ':'))}" for k, v in meta.items()]


def _write_lines(path, lines):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _data_lines(path):
    """Yield ``(line_number, text)`` for non-blank, non-comment lines."""
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise FileFormatError(f"cannot open: {exc.strerror}", path) from None
    with fh:
        for no, raw in enumerate(fh, start=1):
            text = raw.strip()
            if text and not text.startswith("#"):
                yield no, text


def _parse_value(tok: str, path, line: int, allow_missing: bool) -> float:
    tok = tok.strip()
    if tok == NA:
        if not allow_missing:
            raise FileFormatError("missing value (NA) not allowed here", path, line)
        return math.nan
    try:
        v = float(tok)
    except ValueError:
        raise FileFormatError(f"not a number: {tok!r}", path, line) from None
    if not math.isfinite(v):
        raise FileFormatError(f"non-finite value {tok!r}", path, line)
    return v


# signals


def write_signals(path, X, nodes=None, meta: dict | None = None):
    X = np.asarray(X, dtype=float)
    if nodes is None:
        nodes = [str(i) for i in range(X.shape[1])]
    lines = comment_lines(meta)
    lines.append(",".join(nodes))
    lines.extend(",".join(fmt(v) for v in row) for row in X)
    _write_lines(path, lines)


def read_signals(path, allow_missing: bool = False):
    """Return ``(node_ids, X)``; missing entries (``NA``) become NaN."""
    rows = []
    nodes = None
    for no, text in _data_lines(path):
        toks = text.split(",")
        if nodes is None:
            nodes = [t.strip() for t in toks]
            if len(set(nodes)) != len(nodes):
                raise FileFormatError("duplicate node identifiers in header", path, no)
            if any(not t for t in nodes):
                raise FileFormatError("empty node identifier in header", path, no)
            continue
        if len(toks) != len(nodes):
            raise FileFormatError(f"expected {len(nodes)} values, got {len(toks)}", path, no)
        rows.append([_parse_value(t, path, no, allow_missing) for t in toks])
    if nodes is None:
        raise FileFormatError("no header line", path)
    X = np.array(rows, dtype=float).reshape(len(rows), len(nodes))
    return nodes, X


# graphs


def write_graph(path, w, n: int | None = None, meta: dict | None = None):
    """Edge list of the nonzero weights, pairs in edge-vector order."""
    w = np.asarray(w, dtype=float)
    if n is None:
        n = graph.nodes_from_pairs(w.shape[0])
    lines = [f"# n={n}"] + comment_lines(meta)
    for e, (i, j) in enumerate(zip(*graph.triu_pairs(n))):
        if w[e] != 0.0:
            lines.append(f"{i},{j},{fmt(w[e])}")
    _write_lines(path, lines)


def read_graph(path) -> np.ndarray:
    """Return the upper-triangle weight vector of an edge-list file."""
    n = None
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise FileFormatError(f"cannot open: {exc.strerror}", path) from None
    with fh:
        for no, raw in enumerate(fh, start=1):
            text = raw.strip()
            if text.startswith("#") and text[1:].strip().startswith("n="):
                try:
                    n = int(text[1:].strip()[2:])
                except ValueError:
                    raise FileFormatError("bad node count", path, no) from None
                break
            if text and not text.startswith("#"):
                raise FileFormatError("expected '# n=<N>' header before edges", path, no)
    if n is None or n < 1:
        raise FileFormatError("missing '# n=<N>' header", path)
    w = np.zeros(graph.n_pairs(n))
    seen = set()
    for no, text in _data_lines(path):
        toks = text.split(",")
        if len(toks) != 3:
            raise FileFormatError("expected 'i,j,w'", path, no)
        try:
            i, j = int(toks[0]), int(toks[1])
        except ValueError:
            raise FileFormatError("node indices must be integers", path, no) from None
        if not 0 <= i < j < n:
            raise FileFormatError(f"need 0 <= i < j < {n}, got ({i}, {j})", path, no)
        if (i, j) in seen:
            raise FileFormatError(f"duplicate pair ({i}, {j})", path, no)
        seen.add((i, j))
        v = _parse_value(toks[2], path, no, allow_missing=False)
        if not 0.0 <= v <= 1.0:
            raise FileFormatError(f"weight {v} outside [0, 1]", path, no)
        w[graph.pair_index(i, j, n)] = v
    return w


# models


def provenance() -> dict:
    """Generator identity; the timestamp comes from SOURCE_DATE_EPOCH when set
    so that repeated runs stay byte-identical by default."""
    stamp = os.environ.get("SOURCE_DATE_EPOCH")
    return {
        "generator": f"figlearn {__version__}",
        "numpy": np.__version__,
        "timestamp": int(stamp) if stamp and stamp.isdigit() else None,
    }


def model_to_dict(model: LearnedModel, nodes=None, prov: dict | None = None) -> dict:
    n = model.n
    if nodes is None:
        nodes = [str(i) for i in range(n)]
    cfg = model.config.to_dict() if model.config is not None else None
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "n": n,
        "nodes": list(nodes),
        "edge_order": "row-major strict upper triangle",
        "z": None if model.logits is None else [float(v) for v in model.logits],
        "graph_weights": None if model.graph_weights is None else [float(v) for v in model.graph_weights],
        "filter": model.filter.to_dict(),
        "loss_trace": [float(v) for v in model.loss_trace],
        "initial_loss": float(model.initial_loss),
        "mean_sq_norm": float(model.mean_sq_norm),
        "rounds_run": int(model.rounds_run),
        "converged": bool(model.converged),
        "reoriented": bool(model.reoriented),
        "edge_threshold": float(model.edge_threshold()),
        "seed": None if cfg is None else cfg["seed"],
        "config": cfg,
        "provenance": prov if prov is not None else provenance(),
    }


def model_from_dict(d: dict):
    """Return ``(model, nodes, provenance)``."""
    missing = [k for k in ("format_version", "n", "filter") if k not in d]
    if missing:
        raise ValidationError(f"model file lacks keys: {', '.join(missing)}")
    if d["format_version"] != MODEL_FORMAT_VERSION:
        raise ValidationError(f"unsupported model format version {d['format_version']}")
    n = int(d["n"])
    z = d.get("z")
    gw = d.get("graph_weights")
    if (z is None) == (gw is None):
        raise ValidationError("model must carry exactly one of 'z' and 'graph_weights'")
    vec = z if z is not None else gw
    if len(vec) != graph.n_pairs(n):
        raise ValidationError(f"edge vector has {len(vec)} entries, expected {graph.n_pairs(n)}")
    cfg = d.get("config")
    model = LearnedModel(
        n=n,
        filter=filter_from_dict(d["filter"]),
        logits=None if z is None else np.array(z, dtype=float),
        graph_weights=None if gw is None else np.array(gw, dtype=float),
        loss_trace=list(d.get("loss_trace", [])),
        initial_loss=d.get("initial_loss", math.nan),
        mean_sq_norm=d.get("mean_sq_norm", 0.0),
        rounds_run=d.get("rounds_run", 0),
        converged=d.get("converged", False),
        reoriented=d.get("reoriented", False),
        config=None if cfg is None else LearnConfig.from_dict(cfg),
    )
    nodes = d.get("nodes") or [str(i) for i in range(n)]
    return model, nodes, d.get("provenance")


def dumps_model(model: LearnedModel, nodes=None, prov: dict | None = None) -> str:
    return json.dumps(model_to_dict(model, nodes, prov), indent=1, sort_keys=True) + "\n"


def write_model(path, model: LearnedModel, nodes=None, prov: dict | None = None):
    Path(path).write_text(dumps_model(model, nodes, prov), encoding="utf-8", newline="\n")


def read_model(path):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise FileFormatError(f"cannot open: {exc.strerror}", path) from None
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    try:
        return model_from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"bad model: {exc}", path) from None


def write_trace(path, model: LearnedModel, meta: dict | None = None):
    lines = comment_lines(meta) + ["round,loss", f"0,{fmt(model.initial_loss)}"]
    lines += [f"{r},{fmt(J)}" for r, J in enumerate(model.loss_trace, start=1)]
    _write_lines(path, lines)


def write_table(path, columns, rows, meta: dict | None = None):
    """Plain CSV of dict rows; missing or None cells become ``NA``."""
    lines = comment_lines(meta) + [",".join(columns)]
    for row in rows:
        cells = []
        for c in columns:
            v = row.get(c)
            if v is None:
                cells.append(NA)
            elif isinstance(v, (float, int, np.floating, np.integer)) and not isinstance(v, bool):
                cells.append(fmt(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    _write_lines(path, lines)
