import math

import numpy as np
import pytest

from decenopt.data import synthesize
from decenopt.objective import (LogisticDataset, LogisticProblem, QuadraticProblem,
                                estimate_smoothness, softplus)
from helpers import fd_gradient, mean_component_gradients


def single_sample_problem(theta, xi, reg):
    theta = np.asarray(theta, dtype=float)
    return LogisticProblem(LogisticDataset(
        features=theta.reshape(1, 1, -1), labels=np.array([[float(xi)]]), reg=reg))


def random_logistic(n, m, p, seed, reg=1e-3):
    rng = np.random.default_rng(seed)
    theta = rng.normal(size=(n, m, p))
    theta /= np.linalg.norm(theta, axis=2, keepdims=True)
    labels = rng.choice([-1.0, 1.0], size=(n, m))
    return LogisticProblem(LogisticDataset(features=theta, labels=labels, reg=reg))


# ---------------------------------------------------------------------------
# logistic values

def test_value_at_origin_is_log2():
    prob = random_logistic(2, 3, 4, seed=0)
    x = np.zeros(4)
    for i in range(2):
        for j in range(3):
            assert prob.component_value(i, j, x) == pytest.approx(math.log(2), abs=1e-15)


def test_value_large_margin_tends_to_regularizer():
    # loss -> 0 as the classification margin grows; only r(x) remains
    prob = single_sample_problem([1.0], +1, reg=0.001)
    x = np.array([50.0])
    r = 0.001 * x[0] ** 2 / (1 + x[0] ** 2)
    assert prob.component_value(0, 0, x) == pytest.approx(r, abs=1e-18)


def test_value_hand_example():
    # p=1, theta=1, xi=+1, x=1: log(1+e^{-1}) + R/2 with R=0.001, by naive evaluation
    prob = single_sample_problem([1.0], +1, reg=0.001)
    expected = math.log(1.0 + math.exp(-1.0)) + 0.001 * 0.5
    assert prob.component_value(0, 0, np.array([1.0])) == pytest.approx(expected, rel=1e-12)


def test_value_finite_for_huge_margins():
    prob = single_sample_problem([1.0], +1, reg=0.001)
    for x in (np.array([700.0]), np.array([-700.0])):
        v = prob.component_value(0, 0, x)
        assert np.isfinite(v)
    assert np.isfinite(softplus(np.array([750.0, -750.0]))).all()


# ---------------------------------------------------------------------------
# logistic gradients

def test_gradient_at_origin():
    prob = random_logistic(2, 4, 3, seed=1, reg=0.5)
    x = np.zeros(3)
    for i in range(2):
        for j in range(4):
            theta = prob.dataset.features[i, j]
            xi = prob.dataset.labels[i, j]
            assert np.allclose(prob.component_gradient(i, j, x), -xi * theta / 2, atol=1e-15)


def test_gradient_hand_example():
    # sigma(-1) = 1/(1+e)
    prob = single_sample_problem([1.0], +1, reg=0.0)
    g = prob.component_gradient(0, 0, np.array([1.0]))
    assert g[0] == pytest.approx(-1.0 / (1.0 + math.e), rel=1e-12)


def test_gradient_matches_finite_differences():
    prob = random_logistic(3, 5, 6, seed=2)
    rng = np.random.default_rng(3)
    for _ in range(100):
        i = int(rng.integers(prob.n))
        j = int(rng.integers(prob.m))
        x = rng.normal(size=prob.p)
        g = prob.component_gradient(i, j, x)
        g_fd = fd_gradient(lambda z: prob.component_value(i, j, z), x)
        assert np.linalg.norm(g - g_fd) <= 1e-6 * (1.0 + np.linalg.norm(g_fd))


def test_component_index_out_of_range():
    prob = random_logistic(2, 3, 4, seed=4)
    with pytest.raises(IndexError):
        prob.component_gradient(5, 0, np.zeros(4))
    with pytest.raises(IndexError):
        prob.batch_gradient(2, np.zeros(4))


# ---------------------------------------------------------------------------
# batch and full gradients

def test_batch_gradient_m1_equals_component():
    prob = random_logistic(2, 1, 3, seed=5)
    x = np.array([0.3, -0.2, 1.1])
    assert np.array_equal(prob.batch_gradient(0, x), prob.component_gradient(0, 0, x))


def test_batch_gradient_identical_components():
    theta = np.tile(np.array([3.0, 4.0]) / 5.0, (1, 4, 1))
    prob = LogisticProblem(LogisticDataset(features=theta, labels=np.ones((1, 4)), reg=0.0))
    x = np.array([0.1, -0.7])
    assert np.allclose(prob.batch_gradient(0, x), prob.component_gradient(0, 2, x), atol=1e-16)


def test_batch_gradient_three_component_sum():
    prob = random_logistic(1, 3, 4, seed=6)
    x = np.random.default_rng(7).normal(size=4)
    g = (prob.component_gradient(0, 0, x) + prob.component_gradient(0, 1, x)
         + prob.component_gradient(0, 2, x)) / 3
    assert np.allclose(prob.batch_gradient(0, x), g, atol=1e-16)


def test_batch_gradient_matches_direct_mean():
    for prob in (random_logistic(2, 7, 3, seed=8),
                 synthesize("heterogeneous", 2, 7, 3, seed=8)):
        x = np.random.default_rng(9).normal(size=3)
        for i in range(prob.n):
            assert np.allclose(prob.batch_gradient(i, x),
                               mean_component_gradients(prob, i, x), rtol=1e-12)


def test_full_gradient_single_node():
    prob = random_logistic(1, 5, 3, seed=10)
    x = np.random.default_rng(11).normal(size=3)
    assert np.allclose(prob.full_gradient(x), prob.batch_gradient(0, x), atol=1e-16)


def test_full_gradient_identical_nodes():
    prob = synthesize("homogeneous", 4, 5, 3, seed=12)
    x = np.random.default_rng(13).normal(size=3)
    assert np.allclose(prob.full_gradient(x), prob.batch_gradient(2, x), rtol=1e-13)


def test_full_gradient_two_node_quadratic_midpoint():
    # equal curvatures: global minimum at the average of the two node minimizers
    c = np.zeros((2, 1, 2))
    c[0, 0] = [1.0, -2.0]
    c[1, 0] = [3.0, 6.0]
    prob = QuadraticProblem(np.ones((2, 1, 2)), c)
    mid = (c[0, 0] + c[1, 0]) / 2
    assert np.allclose(prob.full_gradient(mid), 0.0, atol=1e-15)
    assert np.allclose(prob.minimizer(), mid, atol=1e-15)


def test_stacked_oracles_match_rowwise():
    prob = random_logistic(3, 6, 4, seed=14)
    rng = np.random.default_rng(15)
    X = rng.normal(size=(3, 4))
    stacked = prob.batch_gradients(X)
    for i in range(3):
        assert np.allclose(stacked[i], prob.batch_gradient(i, X[i]), rtol=1e-13)
    idx = rng.integers(0, 6, size=(3, 2))
    mb = prob.minibatch_gradients(X, idx)
    for i in range(3):
        gs = [prob.component_gradient(i, int(j), X[i]) for j in idx[i]]
        assert np.allclose(mb[i], np.mean(gs, axis=0), rtol=1e-13)


# ---------------------------------------------------------------------------
# smoothness

def test_smoothness_constants():
    assert estimate_smoothness(random_logistic(1, 2, 2, seed=16, reg=0.0)) == 0.25
    assert estimate_smoothness(random_logistic(1, 2, 2, seed=16, reg=0.001)) == pytest.approx(0.252)
    quad = QuadraticProblem(np.full((2, 3, 2), 0.5), np.zeros((2, 3, 2)))
    assert estimate_smoothness(quad) == 0.5


def test_smoothness_override():
    prob = LogisticProblem(random_logistic(1, 2, 2, seed=16).dataset, L=1.5)
    assert prob.L == 1.5


def test_mean_squared_smoothness_sampled():
    # (1/m) sum_j ||g_j(x) - g_j(y)||^2 <= L^2 ||x-y||^2 on random pairs
    prob = random_logistic(2, 6, 4, seed=17)
    rng = np.random.default_rng(18)
    for _ in range(1000):
        i = int(rng.integers(prob.n))
        x = rng.normal(size=prob.p) * rng.uniform(0.1, 3.0)
        y = rng.normal(size=prob.p) * rng.uniform(0.1, 3.0)
        ms = np.mean([np.sum((prob.component_gradient(i, j, x)
                              - prob.component_gradient(i, j, y)) ** 2)
                      for j in range(prob.m)])
        assert ms <= prob.L ** 2 * np.sum((x - y) ** 2) * (1.0 + 1e-12)


# ---------------------------------------------------------------------------
# dissimilarity

def test_dissimilarity_zero_for_identical_nodes():
    prob = synthesize("homogeneous", 5, 4, 3, seed=19)
    rng = np.random.default_rng(20)
    for _ in range(10):
        assert prob.dissimilarity_at(rng.normal(size=3)) == pytest.approx(0.0, abs=1e-26)


def test_dissimilarity_single_node_zero():
    prob = random_logistic(1, 4, 3, seed=21)
    assert prob.dissimilarity_at(np.random.default_rng(22).normal(size=3)) == 0.0


def test_dissimilarity_two_node_formula():
    c = np.zeros((2, 1, 2))
    c[0, 0] = [1.0, 0.0]
    c[1, 0] = [-1.0, 2.0]
    prob = QuadraticProblem(np.ones((2, 1, 2)), c)
    x = np.array([0.4, -0.3])
    a = prob.batch_gradient(0, x)
    b = prob.batch_gradient(1, x)
    assert prob.dissimilarity_at(x) == pytest.approx(np.sum(((a - b) / 2) ** 2), rel=1e-12)


# ---------------------------------------------------------------------------
# local-vs-global gradient deviation bound

def test_mean_local_gradient_deviation_bound():
    # ||mean_i grad f_i(x_i) - grad F(xbar)||^2 <= (L^2/n) ||X - J X||^2
    for prob in (random_logistic(4, 5, 3, seed=23),
                 synthesize("heterogeneous", 4, 5, 3, seed=23)):
        rng = np.random.default_rng(24)
        for _ in range(50):
            X = rng.normal(size=(prob.n, prob.p))
            xbar = X.mean(axis=0)
            lhs = np.sum((prob.batch_gradients(X).mean(axis=0)
                          - prob.full_gradient(xbar)) ** 2)
            rhs = prob.L ** 2 / prob.n * np.sum((X - xbar) ** 2)
            assert lhs <= rhs * (1.0 + 1e-12)


# ---------------------------------------------------------------------------
# dataset validation

def test_dataset_rejects_bad_labels():
    theta = np.ones((1, 1, 1))
    with pytest.raises(ValueError):
        LogisticDataset(features=theta, labels=np.array([[2.0]]))


def test_dataset_rejects_non_unit_features():
    with pytest.raises(ValueError):
        LogisticDataset(features=np.full((1, 1, 2), 1.0), labels=np.array([[1.0]]))


def test_dataset_rejects_negative_reg():
    with pytest.raises(ValueError):
        LogisticDataset(features=np.ones((1, 1, 1)), labels=np.array([[1.0]]), reg=-0.1)


def test_quadratic_validation():
    with pytest.raises(ValueError):
        QuadraticProblem(np.zeros((1, 1, 1)), np.zeros((1, 1, 1)))
    with pytest.raises(ValueError):
        QuadraticProblem(np.ones((1, 1, 2)), np.zeros((1, 1, 3)))
