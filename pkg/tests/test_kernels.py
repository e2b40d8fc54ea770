import numpy as np
import pytest

from kcpd.autodiff import Tensor, parameter, tsum
from kcpd.errors import ParameterError, ShapeError
from kcpd.kernels import (
    RbfKernel,
    gram,
    gram_from_sqdists,
    gram_tensor,
    median_heuristic,
    rbf_eval,
    sq_dists,
)


def test_rbf_eval_identical_points_exact_one():
    assert rbf_eval([1.0, 2.0], [1.0, 2.0], 3.7) == 1.0


def test_rbf_eval_hand_value():
    assert rbf_eval(0.0, 2.0, 1.0) == pytest.approx(np.exp(-2.0), abs=1e-15)


def test_rbf_eval_symmetry():
    rng = np.random.default_rng(0)
    for _ in range(10):
        x, y = rng.normal(size=3), rng.normal(size=3)
        assert rbf_eval(x, y, 0.7) == rbf_eval(y, x, 0.7)


def test_rbf_eval_validation():
    with pytest.raises(ParameterError):
        rbf_eval(0.0, 1.0, 0.0)
    with pytest.raises(ParameterError):
        rbf_eval(0.0, 1.0, -1.0)
    with pytest.raises(ShapeError):
        rbf_eval([0.0, 1.0], [0.0], 1.0)


def test_median_heuristic_three_points():
    # pairs of {0,1,2}: squared distances {1, 4, 1}, median 1, halved
    assert median_heuristic([0.0, 1.0, 2.0]) == pytest.approx(0.5)


def test_median_heuristic_identical_points_fallback():
    assert median_heuristic(np.zeros((5, 2))) == 1.0


def test_median_heuristic_zero_median_uses_smallest_positive():
    # six of ten pairwise distances are zero, so the median is zero; the
    # smallest positive squared distance is 1
    assert median_heuristic([0.0, 0.0, 0.0, 0.0, 1.0]) == pytest.approx(0.5)


def test_median_heuristic_scaling():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(20, 3))
    s = median_heuristic(X)
    assert median_heuristic(2.5 * X) == pytest.approx(2.5**2 * s, rel=1e-12)


def test_median_heuristic_permutation_invariant():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(15, 2))
    assert median_heuristic(X[::-1]) == pytest.approx(median_heuristic(X), rel=1e-12)


def test_median_heuristic_needs_two_samples():
    with pytest.raises(ParameterError):
        median_heuristic([[1.0, 2.0]])


def test_gram_unit_diagonal_exact():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(6, 4))
    K = gram(X, X, RbfKernel(0.9))
    assert np.all(np.diag(K) == 1.0)
    assert np.allclose(K, K.T)


def test_gram_single_pair_matches_rbf_eval():
    x, y = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    K = gram(x[None], y[None], RbfKernel(2.0))
    assert K.shape == (1, 1)
    assert K[0, 0] == pytest.approx(rbf_eval(x, y, 2.0), rel=1e-14)


def test_gram_psd_within_tolerance():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(8, 3))
    K = gram(X, X, RbfKernel(1.3))
    assert np.linalg.eigvalsh(K).min() >= -1e-8


def test_gram_dimension_mismatch():
    with pytest.raises(ShapeError):
        gram(np.zeros((3, 2)), np.zeros((3, 4)), RbfKernel(1.0))


def test_gram_callable_kernel_agrees_with_fast_path():
    rng = np.random.default_rng(5)
    X, Y = rng.normal(size=(4, 2)), rng.normal(size=(5, 2))
    k = RbfKernel(0.6)
    slow = gram(X, Y, lambda a, b: rbf_eval(a, b, 0.6))
    assert np.allclose(slow, k.gram(X, Y), atol=1e-14)


def test_gram_from_sqdists_matches_gram():
    rng = np.random.default_rng(6)
    X, Y = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
    d2 = sq_dists(X, Y)
    for s2 in (0.25, 1.0, 7.0):
        assert np.allclose(gram_from_sqdists(d2, s2), RbfKernel(s2).gram(X, Y), atol=1e-15)


def test_gram_tensor_matches_numpy_gram():
    rng = np.random.default_rng(7)
    X, Y = rng.normal(size=(6, 3)), rng.normal(size=(4, 3))
    K = gram_tensor(Tensor(X), Tensor(Y), 1.7)
    assert np.allclose(K.data, RbfKernel(1.7).gram(X, Y), atol=1e-12)


def test_gram_tensor_gradient_vs_fd():
    rng = np.random.default_rng(8)
    x0 = rng.normal(size=(3, 2))
    y = rng.normal(size=(4, 2))

    def f(flat):
        k = np.exp(-((flat.reshape(3, 2)[:, None] - y[None]) ** 2).sum(-1) / (2 * 0.8))
        return float(k.sum())

    p = parameter(x0)
    tsum(gram_tensor(p, Tensor(y), 0.8)).backward()
    g_fd = np.zeros(6)
    flat0 = x0.ravel()
    for i in range(6):
        up, dn = flat0.copy(), flat0.copy()
        up[i] += 1e-6
        dn[i] -= 1e-6
        g_fd[i] = (f(up) - f(dn)) / 2e-6
    assert np.linalg.norm(p.grad.ravel() - g_fd) / np.linalg.norm(g_fd) < 1e-7


def test_kernel_values_in_unit_interval():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(10, 2)) * 5
    K = gram(X, X, RbfKernel(0.3))
    assert K.min() > 0.0
    assert K.max() <= 1.0
