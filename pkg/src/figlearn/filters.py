"""Spectral filters: the learnable scalar network and closed-form references.

Both kinds expose ``evaluate(lam)`` and ``derivative(lam)``, acting
elementwise on a vector of eigenvalues.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ValidationError

DEFAULT_LAYERS = (1, 30, 30, 30, 30, 30, 1)


def softplus(x):
    return np.logaddexp(0.0, x)


class FilterNetwork:
    """Scalar-to-scalar MLP with tanh hidden units and a softplus head.

    ``weights[k]`` has shape ``(fan_in, fan_out)`` so a batch of inputs as a
    column is propagated as ``a @ W + b``.
    """

    def __init__(self, weights, biases):
        if len(weights) != len(biases) or not weights:
            raise ValidationError("need one bias vector per weight matrix")
        self.weights = [np.array(W, dtype=float) for W in weights]
        self.biases = [np.array(b, dtype=float).reshape(-1) for b in biases]
        if self.weights[0].shape[0] != 1 or self.weights[-1].shape[1] != 1:
            raise ValidationError("network must map scalars to scalars")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise ValidationError(f"layer {k}: weight {W.shape} and bias {b.shape} disagree")
            if k and W.shape[0] != self.weights[k - 1].shape[1]:
                raise ValidationError(f"layer {k}: input width {W.shape[0]} does not chain")

    @classmethod
    def initialize(cls, rng: np.random.Generator, layer_sizes=DEFAULT_LAYERS) -> "FilterNetwork":
        """Glorot-uniform weights, zero biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            a = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-a, a, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(W.shape[1] for W in self.weights)

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def copy(self) -> "FilterNetwork":
        return FilterNetwork(self.weights, self.biases)

    # flat parameter view, used by the optimizer
    def get_flat(self) -> np.ndarray:
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts.append(W.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def set_flat(self, theta) -> None:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValidationError(f"expected {self.n_params} parameters, got {theta.shape}")
        pos = 0
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[k] = theta[pos:pos + W.size].reshape(W.shape).copy()
            pos += W.size
            self.biases[k] = theta[pos:pos + b.size].copy()
            pos += b.size

    def _forward(self, lam):
        a = np.asarray(lam, dtype=float).reshape(-1, 1)
        acts = [a]
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            # broadcast sum instead of GEMM: each output then has a fixed
            # summation order, so permuting inputs permutes outputs exactly
            pre = (a[:, :, None] * W).sum(axis=1) + b
            a = pre if k == last else np.tanh(pre)
            acts.append(a)
        return acts

    def raw_output(self, lam) -> np.ndarray:
        """Network output before the softplus head."""
        return self._forward(lam)[-1][:, 0]

    def evaluate(self, lam) -> np.ndarray:
        return softplus(self.raw_output(lam))

    __call__ = evaluate

    def derivative(self, lam) -> np.ndarray:
        """d/dx softplus(f(x)) at each input, by forward-mode propagation."""
        acts = self._forward(lam)
        t = np.ones_like(acts[0])
        last = len(self.weights) - 1
        for k, W in enumerate(self.weights):
            t = t @ W
            if k != last:
                t = t * (1.0 - acts[k + 1] ** 2)
        return expit(acts[-1][:, 0]) * t[:, 0]

    def backprop(self, lam, upstream):
        """Gradient of ``sum_k upstream_k * h(lam_k)`` w.r.t. all parameters.

        Returns ``(weight_grads, bias_grads)`` shaped like the parameters.
        """
        acts = self._forward(lam)
        upstream = np.asarray(upstream, dtype=float).reshape(-1, 1)
        if upstream.shape[0] != acts[0].shape[0]:
            raise ValidationError("upstream gradient length does not match input")
        delta = upstream * expit(acts[-1])
        gW = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        for k in range(len(self.weights) - 1, -1, -1):
            gW[k] = acts[k].T @ delta
            gb[k] = delta.sum(axis=0)
            if k:
                delta = (delta @ self.weights[k].T) * (1.0 - acts[k] ** 2)
        return gW, gb

    def backprop_flat(self, lam, upstream) -> np.ndarray:
        gW, gb = self.backprop(lam, upstream)
        parts = []
        for W, b in zip(gW, gb):
            parts.append(W.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def reflected(self, c: float) -> "FilterNetwork":
        """Network computing ``x -> h(c - x)`` (exact: the first layer is affine)."""
        out = self.copy()
        out.biases[0] = self.biases[0] + c * self.weights[0][0]
        out.weights[0] = -self.weights[0]
        return out

    def to_dict(self) -> dict:
        return {
            "kind": "network",
            "hidden_activation": "tanh",
            "layer_sizes": list(self.layer_sizes),
            "layers": [
                {"weight": W.tolist(), "bias": b.tolist()}
                for W, b in zip(self.weights, self.biases)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterNetwork":
        layers = d["layers"]
        return cls([lay["weight"] for lay in layers], [lay["bias"] for lay in layers])


REFERENCE_KINDS = ("heat", "normal", "highpass")
DEFAULT_SCALES = {"heat": 0.1, "normal": None, "highpass": 0.1}


@dataclass(frozen=True)
class ReferenceFilter:
    """Closed-form filter.

    * ``heat``:     exp(-s x)
    * ``normal``:   x**-0.5 for x > 0, 0 at x = 0
    * ``highpass``: s x / (1 + s x)

    ``normal`` treats inputs within ``zero_tol`` of zero as zero, so the
    numerically-zero Laplacian eigenvalue maps to 0 rather than to a huge
    value. Inputs below ``-zero_tol`` raise ``ValidationError``.
    """

    kind: str
    scale: float | None = None
    zero_tol: float = field(default=1e-9, compare=False)

    def __post_init__(self):
        if self.kind not in REFERENCE_KINDS:
            raise ValidationError(f"unknown filter kind {self.kind!r}")
        if self.scale is None and self.kind != "normal":
            object.__setattr__(self, "scale", DEFAULT_SCALES[self.kind])
        if self.kind == "normal":
            object.__setattr__(self, "scale", None)

    def _normal_mask(self, x):
        if np.any(x < -self.zero_tol):
            raise ValidationError("normal filter is undefined for negative inputs")
        return x > self.zero_tol

    def evaluate(self, lam) -> np.ndarray:
        x = np.asarray(lam, dtype=float)
        s = self.scale
        if self.kind == "heat":
            return np.exp(-s * x)
        if self.kind == "highpass":
            return s * x / (1.0 + s * x)
        pos = self._normal_mask(x)
        out = np.zeros_like(x)
        out[pos] = 1.0 / np.sqrt(x[pos])
        return out

    __call__ = evaluate

    def derivative(self, lam) -> np.ndarray:
        x = np.asarray(lam, dtype=float)
        s = self.scale
        if self.kind == "heat":
            return -s * np.exp(-s * x)
        if self.kind == "highpass":
            return s / (1.0 + s * x) ** 2
        pos = self._normal_mask(x)
        out = np.zeros_like(x)
        out[pos] = -0.5 * x[pos] ** -1.5
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "scale": self.scale}

    @classmethod
    def from_dict(cls, d: dict) -> "ReferenceFilter":
        return cls(d["kind"], d.get("scale"))

    @classmethod
    def parse(cls, text: str) -> "ReferenceFilter":
        """Parse ``heat``, ``heat:0.2``, ``normal``, ``highpass:0.1``."""
        kind, _, arg = text.strip().partition(":")
        kind = kind.replace("-", "").lower()
        if kind not in REFERENCE_KINDS:
            raise ValidationError(f"unknown filter {text!r}; expected one of {', '.join(REFERENCE_KINDS)}")
        if not arg:
            return cls(kind)
        if kind == "normal":
            raise ValidationError("the normal filter takes no parameter")
        try:
            s = float(arg)
        except ValueError:
            raise ValidationError(f"bad filter parameter in {text!r}") from None
        if not np.isfinite(s) or s < 0:
            raise ValidationError(f"filter parameter must be finite and >= 0, got {arg}")
        return cls(kind, s)

    def __str__(self) -> str:
        return self.kind if self.scale is None else f"{self.kind}:{self.scale!r}"


def filter_from_dict(d: dict):
    if d["kind"] == "network":
        return FilterNetwork.from_dict(d)
    return ReferenceFilter.from_dict(d)
