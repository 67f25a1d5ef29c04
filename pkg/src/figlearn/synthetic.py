"""Synthetic graphs, filtered white-noise signals and edge-recovery metrics.

Random numbers come from numpy's PCG64 bit generator; standard normals use
numpy's ziggurat sampler (``Generator.standard_normal``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import graph
from .errors import ValidationError
from .filters import ReferenceFilter
from .linalg import sym_eig

RNG_DESCRIPTION = f"numpy {np.__version__} PCG64 + ziggurat standard_normal"


@dataclass(frozen=True)
class SbmSpec:
    n: int
    num_clusters: int = 2
    p_within: float = 0.3
    p_between: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError("need at least 2 nodes")
        if not 1 <= self.num_clusters <= self.n:
            raise ValidationError(f"cluster count must lie in [1, {self.n}]")
        for name in ("p_within", "p_between"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {p}")


def cluster_labels(n: int, k: int) -> np.ndarray:
    """Balanced contiguous blocks; the ``n % k`` leftover nodes go one each
    to the first clusters."""
    sizes = [n // k + (1 if c < n % k else 0) for c in range(k)]
    return np.repeat(np.arange(k), sizes)


def generate_sbm(spec: SbmSpec) -> np.ndarray:
    """Binary upper-triangle edge indicators of a stochastic block model graph."""
    labels = cluster_labels(spec.n, spec.num_clusters)
    i, j = graph.triu_pairs(spec.n)
    p = np.where(labels[i] == labels[j], spec.p_within, spec.p_between)
    rng = np.random.default_rng(spec.seed)
    return (rng.random(p.shape[0]) < p).astype(float)


def filter_operator(L, f: ReferenceFilter) -> np.ndarray:
    """``h(L)`` with eigenvalues clamped at zero first."""
    eig = sym_eig(L, name="Laplacian")
    return eig.reconstruct(f.evaluate(np.clip(eig.eigenvalues, 0.0, None)))


def generate_signals(L, f: ReferenceFilter, M: int, seed: int) -> np.ndarray:
    """``M`` rows of ``h(L) x0`` with ``x0`` standard normal."""
    if M < 1:
        raise ValidationError("need at least one signal")
    H = filter_operator(L, f)
    rng = np.random.default_rng(seed)
    X0 = rng.standard_normal((M, H.shape[0]))
    return X0 @ H


@dataclass(frozen=True)
class EdgeMetrics:
    f1: float
    precision: float
    recall: float
    accuracy: float
    tp: int
    fp: int
    fn: int
    tn: int

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("f1", "precision", "recall", "accuracy", "tp", "fp", "fn", "tn")}


def edge_metrics(true_w, learned_w) -> EdgeMetrics:
    """Confusion counts over node pairs, edge present = positive class."""
    t = np.asarray(true_w) > 0.5
    p = np.asarray(learned_w) > 0.5
    if t.shape != p.shape:
        raise ValidationError(f"edge vectors differ in length: {t.shape} vs {p.shape}")
    tp = int(np.sum(t & p))
    fp = int(np.sum(~t & p))
    fn = int(np.sum(t & ~p))
    tn = int(np.sum(~t & ~p))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    total = t.size
    accuracy = (tp + tn) / total if total else 1.0
    return EdgeMetrics(f1, precision, recall, accuracy, tp, fp, fn, tn)
