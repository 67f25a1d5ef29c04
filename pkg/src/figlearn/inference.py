"""Missing-value inference through a learned graph filter.

Given ``H = h(L)`` and a partially observed signal ``y``, find a latent
white signal ``x`` minimizing ``sum_{i observed} ((H x)_i - y_i)^2`` with
Adam, and report the completed signal ``H x``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .learn import AdamState, adam_step


@dataclass(frozen=True)
class InferenceConfig:
    steps: int = 2000
    learning_rate: float = 0.05
    seed: int = 0
    init_scale: float = 0.01

    def __post_init__(self):
        if self.steps <= 0 or self.learning_rate <= 0:
            raise ValidationError("steps and learning_rate must be positive")
        if self.init_scale < 0:
            raise ValidationError("init_scale must be nonnegative")


@dataclass
class InferenceResult:
    completed: np.ndarray
    latent: np.ndarray
    observed: np.ndarray
    fit_mse: float
    objective_trace: np.ndarray

    def hidden_mse(self, truth) -> float:
        """MSE against ``truth`` over the entries that were not observed."""
        hidden = ~self.observed
        if not hidden.any():
            return float("nan")
        d = self.completed[hidden] - np.asarray(truth, dtype=float)[hidden]
        return float(np.mean(d * d))


def objective(H, y, mask, x) -> float:
    r = (H @ x - y)[mask]
    return float(r @ r)


def objective_grad(H, y, mask, x) -> np.ndarray:
    """``2 H^T M (H x - y)`` with ``M`` the observation mask."""
    r = np.where(mask, H @ x - y, 0.0)
    return 2.0 * (H.T @ r)


def infer_missing(H, y, cfg: InferenceConfig | None = None) -> InferenceResult:
    """Complete ``y`` (NaN marks missing entries) under the filter ``H``.

    ``x`` starts as seeded standard-normal noise times ``cfg.init_scale``.
    """
    cfg = cfg or InferenceConfig()
    H = np.asarray(H, dtype=float)
    y = np.asarray(y, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or y.shape != (H.shape[0],):
        raise ValidationError(f"filter {H.shape} and signal {y.shape} do not match")
    mask = ~np.isnan(y)
    if not mask.any():
        raise ValidationError("signal has no observed entries")
    y0 = np.where(mask, y, 0.0)
    rng = np.random.default_rng(cfg.seed)
    x = cfg.init_scale * rng.standard_normal(y.shape[0])
    state = AdamState.zeros(x.shape, cfg.learning_rate)
    trace = np.empty(cfg.steps + 1)
    trace[0] = objective(H, y0, mask, x)
    for t in range(cfg.steps):
        x, state = adam_step(state, x, objective_grad(H, y0, mask, x))
        trace[t + 1] = objective(H, y0, mask, x)
    completed = H @ x
    return InferenceResult(
        completed=completed,
        latent=x,
        observed=mask,
        fit_mse=float(trace[-1] / mask.sum()),
        objective_trace=trace,
    )
