"""Learnable graph parameterization.

Edges are stored as a flat vector over the strict upper triangle in
row-major order: pair ``(i, j)`` with ``i < j`` sits at position
``i*n - i*(i+1)/2 + (j - i - 1)``. Unconstrained logits ``z`` map to relaxed
weights ``w = sigmoid(z)`` in (0, 1), and weights map linearly to the
combinatorial Laplacian ``L = D - W``.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import ValidationError


def n_pairs(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(i: int, j: int, n: int) -> int:
    if i > j:
        i, j = j, i
    if not 0 <= i < j < n:
        raise ValidationError(f"invalid node pair ({i}, {j}) for n={n}")
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def triu_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices of all pairs, in edge-vector order."""
    return np.triu_indices(n, 1)


def nodes_from_pairs(m: int) -> int:
    """Node count ``n`` with ``n(n-1)/2 == m``."""
    n = int(round((1 + np.sqrt(1 + 8 * m)) / 2))
    if n_pairs(n) != m:
        raise ValidationError(f"{m} is not a triangular edge count")
    return n


def init_logits(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draws in [-0.5, 0.5], one per node pair."""
    return rng.uniform(-0.5, 0.5, size=n_pairs(n))


def logits_to_weights(z) -> np.ndarray:
    return expit(np.asarray(z, dtype=float))


def weight_grad_to_logit_grad(gw, w) -> np.ndarray:
    gw = np.asarray(gw, dtype=float)
    w = np.asarray(w, dtype=float)
    if gw.shape != w.shape:
        raise ValidationError(f"gradient shape {gw.shape} does not match weights {w.shape}")
    return gw * w * (1.0 - w)


def weights_to_adjacency(w, n: int | None = None) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if n is None:
        n = nodes_from_pairs(w.shape[0])
    elif w.shape != (n_pairs(n),):
        raise ValidationError(f"expected {n_pairs(n)} edge weights for n={n}, got {w.shape}")
    W = np.zeros((n, n))
    iu = triu_pairs(n)
    W[iu] = w
    return W + W.T


def weights_to_laplacian(w, n: int | None = None) -> np.ndarray:
    """Combinatorial Laplacian of the graph with upper-triangle weights ``w``."""
    W = weights_to_adjacency(w, n)
    return np.diag(W.sum(axis=1)) - W


def laplacian_to_weights(L) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    return -L[triu_pairs(L.shape[0])]


def laplacian_grad_to_weight_grad(G, n: int) -> np.ndarray:
    """Adjoint of :func:`weights_to_laplacian` applied to ``G = dJ/dL``.

    For pair ``(i, j)`` the result is ``G_ii + G_jj - G_ij - G_ji``.
    """
    G = np.asarray(G, dtype=float)
    if G.shape != (n, n):
        raise ValidationError(f"gradient shape {G.shape} does not match n={n}")
    i, j = triu_pairs(n)
    d = np.diag(G)
    return d[i] + d[j] - G[i, j] - G[j, i]


def binarize(w, threshold: float = 0.5) -> np.ndarray:
    """Edge indicators ``w >= threshold`` as floats."""
    if not 0.0 < threshold < 1.0:
        raise ValidationError(f"threshold must lie in (0, 1), got {threshold}")
    return (np.asarray(w, dtype=float) >= threshold).astype(float)


def split_threshold(w) -> float:
    """Threshold separating ``w`` into two groups with minimal within-group
    sum of squares (the 1-D two-means split).

    Invariant under increasing affine maps of ``w``, which matters because
    jointly learned weights are only determined up to such a map. Returns
    the midpoint between the two groups' adjacent values, or 0.5 when all
    weights are equal.
    """
    s = np.sort(np.asarray(w, dtype=float))
    if s.size < 2 or s[-1] - s[0] <= 1e-12:
        return 0.5
    k = np.arange(1, s.size)
    c1 = np.cumsum(s)[:-1]
    c2 = np.cumsum(s * s)[:-1]
    tot1, tot2 = s.sum(), (s * s).sum()
    sse_lo = c2 - c1 * c1 / k
    sse_hi = (tot2 - c2) - (tot1 - c1) ** 2 / (s.size - k)
    cut = int(np.argmin(sse_lo + sse_hi))
    return float(0.5 * (s[cut] + s[cut + 1]))


def is_valid_laplacian(L, atol: float = 1e-12) -> bool:
    """Membership test for the set of combinatorial graph Laplacians."""
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        return False
    n = L.shape[0]
    scale = max(1.0, float(np.max(np.abs(L)))) if L.size else 1.0
    if np.max(np.abs(L - L.T), initial=0.0) > 1e-12 * scale:
        return False
    off = L[~np.eye(n, dtype=bool)]
    if off.size and off.max() > atol * scale:
        return False
    return bool(np.all(np.abs(L.sum(axis=1)) <= 1e-10 * max(n, 1) * scale))
