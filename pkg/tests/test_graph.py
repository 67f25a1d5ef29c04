import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from figlearn import graph
from figlearn.errors import ValidationError


def test_pair_index_matches_triu_order():
    n = 7
    i, j = graph.triu_pairs(n)
    for e, (a, b) in enumerate(zip(i, j)):
        assert graph.pair_index(a, b, n) == e
        assert graph.pair_index(b, a, n) == e
    with pytest.raises(ValidationError):
        graph.pair_index(2, 2, n)


def test_logits_to_weights():
    assert graph.logits_to_weights([0.0])[0] == 0.5
    w = graph.logits_to_weights([20.0, -800.0, 800.0])
    assert abs(w[0] - (1 - 2.061153622438558e-09)) < 1e-15
    assert w[1] == 0.0 and w[2] == 1.0


def test_init_logits_range():
    z = graph.init_logits(40, np.random.default_rng(0))
    assert z.shape == (780,)
    w = graph.logits_to_weights(z)
    # sigmoid(+-0.5)
    assert w.min() > 0.37754066879814546 and w.max() < 0.6224593312018546


def test_laplacian_small_cases():
    np.testing.assert_array_equal(graph.weights_to_laplacian([1.0]), [[1, -1], [-1, 1]])
    np.testing.assert_array_equal(
        graph.weights_to_laplacian([1.0, 0.0, 1.0]), [[1, -1, 0], [-1, 2, -1], [0, -1, 1]]
    )
    np.testing.assert_array_equal(graph.weights_to_laplacian(np.zeros(6)), np.zeros((4, 4)))


def test_laplacian_roundtrip_weights():
    w = np.random.default_rng(1).random(21)
    np.testing.assert_array_equal(graph.laplacian_to_weights(graph.weights_to_laplacian(w)), w)


def test_adjoint_small_cases():
    assert graph.laplacian_grad_to_weight_grad(np.eye(2), 2)[0] == 2
    assert graph.laplacian_grad_to_weight_grad(np.array([[1.0, -1.0], [-1.0, 1.0]]), 2)[0] == 4
    with pytest.raises(ValidationError):
        graph.laplacian_grad_to_weight_grad(np.eye(3), 4)


def test_adjoint_finite_difference():
    rng = np.random.default_rng(2)
    n = 6
    G = rng.standard_normal((n, n))
    G = G + G.T
    w = rng.random(15)
    dw = rng.standard_normal(15)
    eps = 1e-6
    fd = np.sum(G * (graph.weights_to_laplacian(w + eps * dw) - graph.weights_to_laplacian(w))) / eps
    assert abs(fd - graph.laplacian_grad_to_weight_grad(G, n) @ dw) <= 1e-6 * max(1, abs(fd))


def test_logit_grad():
    assert graph.weight_grad_to_logit_grad([1.0], [0.5])[0] == 0.25
    assert graph.weight_grad_to_logit_grad([123.0], graph.logits_to_weights([40.0]))[0] < 1e-12
    rng = np.random.default_rng(3)
    z = rng.standard_normal(10)
    a = rng.standard_normal(10)
    eps = 1e-6
    fd = (a @ graph.logits_to_weights(z + eps) - a @ graph.logits_to_weights(z - eps)) / (2 * eps)
    gz = graph.weight_grad_to_logit_grad(a, graph.logits_to_weights(z))
    # perturbing all coordinates at once sums the entrywise derivatives
    assert abs(fd - gz.sum()) <= 1e-8
    for k in range(10):
        e = np.zeros(10)
        e[k] = eps
        fdk = (a @ graph.logits_to_weights(z + e) - a @ graph.logits_to_weights(z - e)) / (2 * eps)
        assert abs(fdk - gz[k]) <= 1e-8


def test_binarize():
    np.testing.assert_array_equal(graph.binarize([0.49, 0.51]), [0, 1])
    np.testing.assert_array_equal(graph.binarize([0.3, 0.3], 0.3), [1, 1])
    with pytest.raises(ValidationError):
        graph.binarize([0.2], 1.0)


def test_split_threshold():
    w = np.array([0.1, 0.12, 0.15, 0.7, 0.75])
    assert 0.15 < graph.split_threshold(w) < 0.7
    assert graph.split_threshold(np.full(5, 0.3)) == 0.5
    # invariant under increasing affine maps
    rng = np.random.default_rng(0)
    v = rng.random(40)
    t = graph.split_threshold(v)
    assert np.array_equal(v >= t, (0.2 + 0.5 * v) >= graph.split_threshold(0.2 + 0.5 * v))


def test_valid_laplacian():
    assert graph.is_valid_laplacian(graph.weights_to_laplacian([1.0, 0.5, 0.0]))
    assert not graph.is_valid_laplacian(np.eye(3))
    assert not graph.is_valid_laplacian(np.array([[1.0, 1.0], [1.0, 1.0]]))


weights = arrays(np.float64, 10, elements=st.floats(0, 1))


@settings(max_examples=100, deadline=None)
@given(weights, weights, st.floats(-2, 2), st.floats(-2, 2))
def test_linearity(w1, w2, a, b):
    lhs = graph.weights_to_laplacian(a * w1 + b * w2)
    rhs = a * graph.weights_to_laplacian(w1) + b * graph.weights_to_laplacian(w2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(weights, arrays(np.float64, (5, 5), elements=st.floats(-5, 5)))
def test_adjoint_identity(dw, G):
    G = G + G.T
    lhs = np.sum(G * graph.weights_to_laplacian(dw))
    rhs = graph.laplacian_grad_to_weight_grad(G, 5) @ dw
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


@settings(max_examples=100, deadline=None)
@given(weights)
def test_constant_in_kernel_and_valid(w):
    L = graph.weights_to_laplacian(w)
    assert np.max(np.abs(L @ np.ones(5))) <= 1e-12
    assert graph.is_valid_laplacian(L)


@settings(max_examples=100, deadline=None)
@given(st.floats(-50, 50), st.floats(0.001, 10))
def test_sigmoid_monotone(z, dz):
    a, b = graph.logits_to_weights([z, z + dz])
    assert 0 < a <= b < 1 or (a <= b and b == 1.0)
