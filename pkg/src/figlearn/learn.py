"""Joint graph and filter learning.

The objective is the covariance part of the 2-Wasserstein distance between
the empirical Gaussian N(m, C) and the filtered white-noise model
N(0, h(L)^2):

    J(L, h) = || C^{1/2} - h(L) ||_F^2

(the ``||m||^2`` term is constant and only reported). Gradients are exact:
w.r.t. filter values they are diagonal in the eigenbasis of ``L``, and
w.r.t. ``L`` they follow the Daleckii-Krein divided-difference formula.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import graph
from .errors import NumericalError, ValidationError
from .filters import FilterNetwork, ReferenceFilter
from .linalg import EigenDecomposition, GaussianModel, check_symmetric, sample_stats, sym_eig


def filter_matrix(eig: EigenDecomposition, hvals) -> np.ndarray:
    """``U diag(hvals) U^T``."""
    return eig.reconstruct(np.asarray(hvals, dtype=float))


def loss_from_eig(cov_sqrt, eig: EigenDecomposition, hvals) -> float:
    R = cov_sqrt - filter_matrix(eig, hvals)
    return float(np.sum(R * R))


def loss(cov_sqrt, L, h) -> float:
    """``||cov_sqrt - h(L)||_F^2`` for a network or reference filter ``h``."""
    cov_sqrt = check_symmetric(cov_sqrt, "cov_sqrt")
    L = check_symmetric(L, "Laplacian")
    if cov_sqrt.shape != L.shape:
        raise ValidationError(f"shape mismatch: {cov_sqrt.shape} vs {L.shape}")
    eig = sym_eig(L, name="Laplacian")
    return loss_from_eig(cov_sqrt, eig, h.evaluate(eig.eigenvalues))


def loss_grad_filter(cov_sqrt, eig: EigenDecomposition, hvals) -> np.ndarray:
    """dJ/dh(lambda_k) = -2 u_k^T (C^{1/2} - h(L)) u_k."""
    U = eig.eigenvectors
    d = np.einsum("ik,ij,jk->k", U, cov_sqrt, U)
    return -2.0 * (d - np.asarray(hvals, dtype=float))


def divided_differences(lam, hvals, hderivs, tau: float = 1e-8) -> np.ndarray:
    """First divided differences of h on the spectrum.

    Pairs closer than ``tau * max(1, |lambda_max|)`` use the mean of the two
    derivative values, the limit of the difference quotient.
    """
    lam = np.asarray(lam, dtype=float)
    hvals = np.asarray(hvals, dtype=float)
    hderivs = np.asarray(hderivs, dtype=float)
    dl = lam[:, None] - lam[None, :]
    dh = hvals[:, None] - hvals[None, :]
    thresh = tau * max(1.0, float(np.max(np.abs(lam)))) if lam.size else tau
    close = np.abs(dl) <= thresh
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = np.where(close, 0.5 * (hderivs[:, None] + hderivs[None, :]), dh / np.where(close, 1.0, dl))
    return gamma


def matrix_function_grad(eig: EigenDecomposition, hvals, hderivs, G_h, tau: float = 1e-8) -> np.ndarray:
    """Pull ``G_h = dJ/dh(L)`` back to ``dJ/dL`` through the matrix function."""
    U = eig.eigenvectors
    gamma = divided_differences(eig.eigenvalues, hvals, hderivs, tau)
    G = U @ (gamma * (U.T @ G_h @ U)) @ U.T
    return 0.5 * (G + G.T)


def loss_and_grad_logits(cov_sqrt, z, h, tau: float = 1e-8):
    """Loss and its gradient w.r.t. the edge logits, for a fixed filter."""
    z = np.asarray(z, dtype=float)
    n = cov_sqrt.shape[0]
    w = graph.logits_to_weights(z)
    L = graph.weights_to_laplacian(w, n)
    eig = sym_eig(L, name="Laplacian")
    lam = eig.eigenvalues
    hvals = h.evaluate(lam)
    R = cov_sqrt - filter_matrix(eig, hvals)
    J = float(np.sum(R * R))
    G_L = matrix_function_grad(eig, hvals, h.derivative(lam), -2.0 * R, tau)
    gw = graph.laplacian_grad_to_weight_grad(G_L, n)
    return J, graph.weight_grad_to_logit_grad(gw, w)


def loss_grad_logits(cov_sqrt, z, h, tau: float = 1e-8) -> np.ndarray:
    return loss_and_grad_logits(cov_sqrt, z, h, tau)[1]


def loss_and_grad_params(cov_sqrt, eig: EigenDecomposition, net: FilterNetwork):
    """Loss and flat parameter gradient of a filter network on a fixed graph."""
    lam = eig.eigenvalues
    hvals = net.evaluate(lam)
    J = loss_from_eig(cov_sqrt, eig, hvals)
    upstream = loss_grad_filter(cov_sqrt, eig, hvals)
    return J, net.backprop_flat(lam, upstream)


@dataclass
class AdamState:
    learning_rate: float
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, shape, learning_rate: float, **kw) -> "AdamState":
        return cls(learning_rate, np.zeros(shape), np.zeros(shape), **kw)


def adam_step(state: AdamState, params, grads):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    grads = np.asarray(grads, dtype=float)
    if not np.all(np.isfinite(grads)):
        bad = np.flatnonzero(~np.isfinite(grads))
        raise NumericalError(
            f"non-finite gradient at step {state.step_count + 1} "
            f"({bad.size} entries, first index {bad[0]})"
        )
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, dataclasses.replace(state, first_moment=m, second_moment=v, step_count=t)


@dataclass(frozen=True)
class LearnConfig:
    rounds: int = 50
    filter_steps_per_round: int = 200
    graph_steps_per_round: int = 200
    lr_filter: float = 1e-3
    lr_graph: float = 1e-2
    stop_rel_tol: float = 1e-6
    degenerate_eig_tol: float = 1e-8
    seed: int = 0
    phase_order: str = "filter-first"
    orientation: str = "sparse"

    def __post_init__(self):
        bad = [
            name for name in ("rounds", "filter_steps_per_round", "graph_steps_per_round",
                              "lr_filter", "lr_graph", "stop_rel_tol", "degenerate_eig_tol")
            if not getattr(self, name) > 0
        ]
        if bad:
            raise ValidationError(f"config values must be positive: {', '.join(bad)}")
        if self.seed < 0:
            raise ValidationError("seed must be nonnegative")
        if self.phase_order not in ("filter-first", "graph-first"):
            raise ValidationError(f"unknown phase order {self.phase_order!r}")
        if self.orientation not in ("sparse", "none"):
            raise ValidationError(f"unknown orientation rule {self.orientation!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LearnConfig":
        return cls(**d)


@dataclass
class LearnedModel:
    """Result of :func:`fit`.

    Exactly one of ``logits`` (learned graph) and ``graph_weights`` (graph
    given up front) is set.
    """

    n: int
    filter: FilterNetwork | ReferenceFilter
    logits: np.ndarray | None = None
    graph_weights: np.ndarray | None = None
    loss_trace: list = field(default_factory=list)
    initial_loss: float = float("nan")
    mean_sq_norm: float = 0.0
    rounds_run: int = 0
    converged: bool = False
    reoriented: bool = False
    config: LearnConfig | None = None

    def weights(self) -> np.ndarray:
        if self.logits is not None:
            return graph.logits_to_weights(self.logits)
        return np.asarray(self.graph_weights, dtype=float)

    def laplacian(self) -> np.ndarray:
        return graph.weights_to_laplacian(self.weights(), self.n)

    @property
    def joint(self) -> bool:
        """True when both the graph and the filter were learned."""
        return self.logits is not None and isinstance(self.filter, FilterNetwork)

    def edge_threshold(self) -> float:
        """0.5 when the filter was given; the two-means split of the weights
        when graph and filter were learned jointly (the joint loss cannot
        tell ``w`` from ``a + b*w``, so a fixed cut is arbitrary there)."""
        return graph.split_threshold(self.weights()) if self.joint else 0.5

    def binary_weights(self, threshold: float | None = None) -> np.ndarray:
        if threshold is None:
            threshold = self.edge_threshold()
        return graph.binarize(self.weights(), threshold)

    def spectrum(self) -> EigenDecomposition:
        return sym_eig(self.laplacian(), name="learned Laplacian")

    def filter_values(self):
        """Eigenvalues of the learned Laplacian and the filter at them."""
        lam = self.spectrum().eigenvalues
        return lam, self.filter.evaluate(lam)

    def filter_operator(self) -> np.ndarray:
        eig = self.spectrum()
        return filter_matrix(eig, self.filter.evaluate(eig.eigenvalues))

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1] if self.loss_trace else self.initial_loss


def _check_finite(J: float, where: str):
    if not np.isfinite(J):
        raise NumericalError(f"non-finite loss at {where}")


def fit(data, cfg: LearnConfig | None = None, known_graph=None, known_filter=None,
        init_logits=None, init_filter: FilterNetwork | None = None, callback=None) -> LearnedModel:
    """Alternating minimization of the loss over the graph and the filter.

    ``data`` is a signal matrix (rows are observations) or a precomputed
    :class:`GaussianModel`. Pass ``known_graph`` (a Laplacian) to learn only
    the filter, or ``known_filter`` (a :class:`ReferenceFilter`) to learn only
    the graph. Each round runs a filter phase then a graph phase (or the
    reverse, per ``cfg.phase_order``) and records the loss; the run stops
    early once the round-to-round relative change drops below
    ``cfg.stop_rel_tol``.

    When both graph and filter are learned, the loss cannot distinguish a
    graph from its complement: ``L(1 - w) = n I - 11^T - L(w)`` shares the
    non-constant eigenvectors of ``L(w)``, and the filter ``x -> h(n - x)``
    compensates. With ``cfg.orientation == "sparse"`` a final graph with more
    edges than non-edges is replaced by its complement (logits negated,
    network reflected) and one more round is run to refit the constant mode.

    ``callback(round_index, J)``, if given, is called after every round.
    """
    cfg = cfg or LearnConfig()
    if known_graph is not None and known_filter is not None:
        raise ValidationError("at most one of known_graph and known_filter may be given")
    model = data if isinstance(data, GaussianModel) else sample_stats(data)
    S = model.cov_sqrt
    n = model.n
    tau = cfg.degenerate_eig_tol
    rng = np.random.default_rng(cfg.seed)

    z = None
    fixed_w = None
    if known_graph is not None:
        Lk = check_symmetric(known_graph, "known graph")
        if Lk.shape != (n, n):
            raise ValidationError(f"known graph has shape {Lk.shape}, signals have {n} nodes")
        if not graph.is_valid_laplacian(Lk):
            raise ValidationError("known graph is not a combinatorial Laplacian")
        fixed_w = graph.laplacian_to_weights(Lk)
    else:
        z = graph.init_logits(n, rng) if init_logits is None else np.array(init_logits, dtype=float)
        if z.shape != (graph.n_pairs(n),):
            raise ValidationError(f"initial logits must have length {graph.n_pairs(n)}")

    if known_filter is not None:
        if not isinstance(known_filter, ReferenceFilter):
            raise ValidationError("known_filter must be a ReferenceFilter")
        h = known_filter
    else:
        h = init_filter.copy() if init_filter is not None else FilterNetwork.initialize(rng)

    learn_filter = known_filter is None
    learn_graph = known_graph is None

    def current_eig():
        w = graph.logits_to_weights(z) if learn_graph else fixed_w
        return sym_eig(graph.weights_to_laplacian(w, n), name="Laplacian")

    def current_loss():
        eig = current_eig()
        return loss_from_eig(S, eig, h.evaluate(eig.eigenvalues))

    J0 = current_loss()
    _check_finite(J0, "initialization")
    trace = []
    theta_state = AdamState.zeros(h.n_params, cfg.lr_filter) if learn_filter else None
    z_state = AdamState.zeros(z.shape, cfg.lr_graph) if learn_graph else None

    def filter_phase(r):
        nonlocal theta_state
        eig = current_eig()
        theta = h.get_flat()
        for s in range(cfg.filter_steps_per_round):
            J, g = loss_and_grad_params(S, eig, h)
            _check_finite(J, f"round {r}, filter step {s}")
            theta, theta_state = adam_step(theta_state, theta, g)
            h.set_flat(theta)

    def graph_phase(r):
        nonlocal z, z_state
        for s in range(cfg.graph_steps_per_round):
            J, g = loss_and_grad_logits(S, z, h, tau)
            _check_finite(J, f"round {r}, graph step {s}")
            z, z_state = adam_step(z_state, z, g)

    phases = []
    if learn_filter:
        phases.append(filter_phase)
    if learn_graph:
        phases.append(graph_phase)
    if cfg.phase_order == "graph-first":
        phases.reverse()

    def run_round(r):
        for phase in phases:
            phase(r)
        J = current_loss()
        _check_finite(J, f"end of round {r}")
        trace.append(J)
        if callback is not None:
            callback(r, J)
        return J

    converged = False
    prev = J0
    rounds_run = 0
    for r in range(cfg.rounds):
        J = run_round(r)
        rounds_run = r + 1
        if abs(prev - J) <= cfg.stop_rel_tol * max(abs(prev), 1e-300):
            converged = True
            break
        prev = J

    reoriented = False
    if learn_graph and learn_filter and cfg.orientation == "sparse":
        w = graph.logits_to_weights(z)
        if np.sum(w >= graph.split_threshold(w)) > w.size / 2:
            z = -z
            h = h.reflected(float(n))
            theta_state = AdamState.zeros(h.n_params, cfg.lr_filter)
            z_state = AdamState.zeros(z.shape, cfg.lr_graph)
            run_round(rounds_run)
            rounds_run += 1
            reoriented = True

    return LearnedModel(
        n=n,
        filter=h,
        logits=z,
        graph_weights=fixed_w,
        loss_trace=trace,
        initial_loss=J0,
        mean_sq_norm=model.mean_sq_norm,
        rounds_run=rounds_run,
        converged=converged,
        reoriented=reoriented,
        config=cfg,
    )
