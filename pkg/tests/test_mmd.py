import numpy as np
import pytest

from kcpd.autodiff import Tensor, parameter, tsum
from kcpd.errors import ParameterError
from kcpd.kernels import DeepKernel, RbfKernel
from kcpd.mmd import (
    EPS_VAR,
    _bootstrap_counts,
    _resampled_stats,
    max_ratio_select,
    mmd2_estimate,
    mmd2_from_grams,
    mmd2_unbiased,
    mmd2_unbiased_t,
    mmd2_variance,
    power_bound_objective,
)

K1 = RbfKernel(1.0)


def test_hand_computed_two_point_fixture():
    # X = Y = {0, 2}: within-terms each e^{-2}, cross term 1 + e^{-2}
    X = np.array([[0.0], [2.0]])
    val = mmd2_unbiased(X, X.copy(), K1)
    assert val == pytest.approx(np.exp(-2.0) - 1.0, abs=1e-12)


def test_far_separated_clouds_approach_two():
    X = np.zeros((2, 1))
    Y = np.full((2, 1), 1e6)
    assert mmd2_unbiased(X, Y, K1) == pytest.approx(2.0, abs=1e-12)


def test_constant_data_gives_exact_zero():
    X = np.full((7, 3), 4.2)
    assert mmd2_unbiased(X, X.copy(), K1) == 0.0


def test_input_validation():
    with pytest.raises(ParameterError):
        mmd2_unbiased(np.zeros((3, 1)), np.zeros((4, 1)), K1)
    with pytest.raises(ParameterError):
        mmd2_unbiased(np.zeros((1, 1)), np.zeros((1, 1)), K1)


def test_bound_holds_on_random_data():
    rng = np.random.default_rng(0)
    for _ in range(20):
        X = rng.normal(size=(6, 2)) * rng.uniform(0.1, 10)
        Y = rng.normal(size=(6, 2)) + rng.uniform(-5, 5)
        v = mmd2_unbiased(X, Y, RbfKernel(rng.uniform(0.1, 5)))
        assert -2.0 <= v <= 2.0


def test_symmetric_in_sides():
    rng = np.random.default_rng(1)
    X, Y = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
    assert mmd2_unbiased(X, Y, K1) == pytest.approx(mmd2_unbiased(Y, X, K1), abs=1e-14)


def test_tensor_route_matches_numpy_route():
    rng = np.random.default_rng(2)
    X, Y = rng.normal(size=(8, 3)), rng.normal(size=(8, 3))
    t = mmd2_unbiased_t(Tensor(X), Tensor(Y), 1.4)
    assert t.item() == pytest.approx(mmd2_unbiased(X, Y, RbfKernel(1.4)), abs=1e-12)


def test_tensor_route_gradient_vs_fd():
    rng = np.random.default_rng(3)
    x0 = rng.normal(size=(4, 2))
    Y = rng.normal(size=(4, 2))
    s2 = 0.9

    def f(flat):
        return mmd2_unbiased(flat.reshape(4, 2), Y, RbfKernel(s2))

    p = parameter(x0)
    mmd2_unbiased_t(p, Tensor(Y), s2).backward()
    flat0 = x0.ravel()
    g_fd = np.zeros(flat0.size)
    for i in range(flat0.size):
        up, dn = flat0.copy(), flat0.copy()
        up[i] += 1e-6
        dn[i] -= 1e-6
        g_fd[i] = (f(up) - f(dn)) / 2e-6
    assert np.linalg.norm(p.grad.ravel() - g_fd) / np.linalg.norm(g_fd) < 1e-6


def test_mean_shift_separation_is_monotone():
    # Monte-Carlo mean of the estimate grows with the shift between the sides
    rng = np.random.default_rng(4)
    m, trials = 200, 200
    means = []
    for delta in (0.0, 0.5, 1.0, 2.0):
        vals = [
            mmd2_unbiased(rng.normal(size=(m, 1)), rng.normal(delta, 1.0, size=(m, 1)), K1)
            for _ in range(trials)
        ]
        means.append(np.mean(vals))
    assert all(a <= b for a, b in zip(means, means[1:]))


def test_near_unbiased_under_null():
    rng = np.random.default_rng(5)
    m, draws = 20, 400
    vals = np.array([
        mmd2_unbiased(rng.normal(size=(m, 1)), rng.normal(size=(m, 1)), K1)
        for _ in range(draws)
    ])
    se = vals.std(ddof=1) / np.sqrt(draws)
    assert abs(vals.mean()) <= 4 * se


def test_count_resampling_matches_materialized_resamples():
    # the batched quadratic-form path must agree with literally rebuilding
    # each bootstrap sample and rerunning the estimator
    rng = np.random.default_rng(6)
    X, Y = rng.normal(size=(12, 2)), rng.normal(size=(12, 2)) + 0.3
    k = RbfKernel(0.8)
    kxx, kxy, kyy = k.gram(X, X), k.gram(X, Y), k.gram(Y, Y)
    cx = _bootstrap_counts(rng, 10, 12)
    cy = _bootstrap_counts(rng, 10, 12)
    fast = _resampled_stats(kxx, kxy, kyy, cx, cy)
    for b in range(10):
        xb = X[np.repeat(np.arange(12), cx[b].astype(int))]
        yb = Y[np.repeat(np.arange(12), cy[b].astype(int))]
        assert fast[b] == pytest.approx(mmd2_unbiased(xb, yb, k), abs=1e-10)


def test_variance_floor_on_constant_data():
    X = np.ones((6, 1))
    assert mmd2_variance(X, X.copy(), K1, B=100, rng=np.random.default_rng(0)) == EPS_VAR


def test_variance_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ParameterError):
        mmd2_variance(np.zeros((3, 1)), np.zeros((3, 1)), K1, B=100, rng=rng)
    with pytest.raises(ParameterError):
        mmd2_variance(np.zeros((6, 1)), np.zeros((6, 1)), K1, B=50, rng=rng)


def test_bootstrap_variance_tracks_fresh_draw_variance():
    # oracle: sampling distribution of the estimate over fresh draws
    rng = np.random.default_rng(7)
    m = 100
    fresh = np.array([
        mmd2_unbiased(rng.normal(size=(m, 1)), rng.normal(size=(m, 1)), K1)
        for _ in range(500)
    ])
    truth = fresh.var(ddof=1)
    boot = mmd2_variance(
        rng.normal(size=(m, 1)), rng.normal(size=(m, 1)), K1, B=500, rng=rng
    )
    assert truth / 3 <= boot <= truth * 3


def test_estimate_carries_variance_and_count():
    rng = np.random.default_rng(8)
    X, Y = rng.normal(size=(10, 1)), rng.normal(size=(10, 1))
    est = mmd2_estimate(X, Y, K1, B=100, rng=rng)
    assert est.m == 10
    assert est.variance >= EPS_VAR
    assert est.value == pytest.approx(mmd2_unbiased(X, Y, K1))
    assert mmd2_estimate(X, Y, K1).variance is None


def test_max_ratio_select_single_candidate():
    rng = np.random.default_rng(9)
    X, Y = rng.normal(size=(8, 1)), rng.normal(size=(8, 1))
    assert max_ratio_select(X, Y, [K1], B=100, rng=rng) == 0


def test_max_ratio_select_picks_discriminating_bandwidth():
    # two clusters one unit apart: extreme bandwidths see nothing
    rng = np.random.default_rng(10)
    X = rng.normal(0.0, 0.05, size=(40, 1))
    Y = rng.normal(1.0, 0.05, size=(40, 1))
    kernels = [RbfKernel(1e-8), RbfKernel(0.5), RbfKernel(1e8)]
    assert max_ratio_select(X, Y, kernels, B=200, rng=rng) == 1


def test_max_ratio_select_empty_list():
    with pytest.raises(ParameterError):
        max_ratio_select(np.zeros((4, 1)), np.zeros((4, 1)), [])


def test_power_bound_objective_lambda_zero():
    rng = np.random.default_rng(11)
    xl, xr, z = (rng.normal(size=(5, 2)) for _ in range(3))
    dk = DeepKernel(K1)
    assert power_bound_objective(xl, xr, z, dk, 0.0) == pytest.approx(
        mmd2_unbiased(xr, z, dk), abs=1e-14
    )


def test_power_bound_objective_vanishes_on_constant_windows():
    w = np.full((4, 2), 1.5)
    assert power_bound_objective(w, w.copy(), w.copy(), DeepKernel(K1), 2.0) == 0.0


def test_power_bound_objective_affine_in_lambda():
    rng = np.random.default_rng(12)
    xl, xr, z = (rng.normal(size=(5, 2)) for _ in range(3))
    dk = DeepKernel(K1)
    o0 = power_bound_objective(xl, xr, z, dk, 0.0)
    o1 = power_bound_objective(xl, xr, z, dk, 1.0)
    o2 = power_bound_objective(xl, xr, z, dk, 2.0)
    assert o2 - o1 == pytest.approx(o1 - o0, rel=1e-9)
    with pytest.raises(ParameterError):
        power_bound_objective(xl, xr, z, dk, -0.1)


def test_mmd2_from_grams_all_ones_blocks():
    ones = np.ones((5, 5))
    assert mmd2_from_grams(ones, ones, ones) == 0.0
