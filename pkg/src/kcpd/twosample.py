"""Two-sample hypothesis-test mechanics around the MMD statistic.

The null distribution of m * M-hat is approximated by pooling both samples
and re-splitting at random.  The pooled Gram matrix is computed once; each
permutation's statistic is recovered from indicator-vector quadratic forms,
which turns the permutation loop into a couple of matrix products.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .kernels import RbfKernel, as_samples, gram, gram_from_sqdists, median_heuristic, sq_dists
from .mmd import (
    EPS_VAR,
    _bootstrap_counts,
    _resampled_stats,
    mmd2_from_grams,
    mmd2_unbiased,
)


@dataclass
class TestConfig:
    __test__ = False  # not a pytest class, despite the name

    m: int
    alpha: float = 0.05
    n_permutations: int = 500

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ParameterError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.n_permutations < 100:
            raise ParameterError(f"need >= 100 permutations, got {self.n_permutations}")
        if self.m < 2:
            raise ParameterError(f"need m >= 2 samples per side, got {self.m}")


def _stats_from_gram(K: np.ndarray, m: int, idx: np.ndarray) -> np.ndarray:
    """m * M-hat for each re-split of a pooled 2m-sample Gram matrix.

    idx holds, per permutation, the m pooled indices assigned to the X side.
    Everything reduces to quadratic forms in the 0/1 side-indicator a:
    within-X = a'Ka - diag sum, cross = a'K(1-a), within-Y by complement.
    """
    n2 = K.shape[0]
    n_perm = idx.shape[0]
    A = np.zeros((n2, n_perm))
    A[idx.ravel(), np.repeat(np.arange(n_perm), m)] = 1.0
    KA = K @ A
    q = (A * KA).sum(axis=0)          # a'Ka per permutation
    s = KA.sum(axis=0)                # 1'Ka
    dx = np.diag(K) @ A
    tot, tr = K.sum(), np.trace(K)
    wx = q - dx
    wy = (tot - 2.0 * s + q) - (tr - dx)
    cross = s - q
    mmd = (wx + wy) / (m * (m - 1)) - 2.0 * (cross / (m * m))
    return m * mmd


def permutation_stats(X, Y, k, n_permutations: int, rng) -> np.ndarray:
    """Null statistics m * M-hat from random equal re-splits of the pool."""
    X, Y = as_samples(X), as_samples(Y)
    m = X.shape[0]
    if Y.shape[0] != m:
        raise ParameterError(f"equal sample counts required, got {m} and {Y.shape[0]}")
    pooled = np.vstack([X, Y])
    K = gram(pooled, pooled, k)
    idx = np.argsort(rng.random((n_permutations, 2 * m)), axis=1)[:, :m]
    return _stats_from_gram(K, m, idx)


def permutation_threshold(X, Y, k, cfg: TestConfig, rng=None) -> float:
    """Empirical (1 - alpha) quantile of the permutation null, interpolated."""
    rng = np.random.default_rng() if rng is None else rng
    stats = permutation_stats(X, Y, k, cfg.n_permutations, rng)
    return float(np.quantile(stats, 1.0 - cfg.alpha))


def reject(X, Y, k, c_alpha: float) -> bool:
    """True iff m * M-hat strictly exceeds the threshold."""
    X = as_samples(X)
    return X.shape[0] * mmd2_unbiased(X, Y, k) > c_alpha


def two_sample_test(X, Y, k, cfg: TestConfig, rng=None) -> bool:
    return reject(X, Y, k, permutation_threshold(X, Y, k, cfg, rng))


def estimate_power(sampler_p, sampler_q, chooser, cfg: TestConfig, trials: int, rng=None) -> float:
    """Fraction of trials in which the test rejects.

    Per trial the chooser picks a kernel from its own selection draws (never
    the tested draw), then a fresh (X, Y) pair is tested at level alpha.
    Child generators are spawned per trial, so trials are independent and the
    whole estimate is reproducible from one seed.
    """
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    rng = np.random.default_rng() if rng is None else rng
    hits = 0
    for child in rng.spawn(trials):
        k = chooser(child)
        X = sampler_p(child, cfg.m)
        Y = sampler_q(child, cfg.m)
        if two_sample_test(X, Y, k, cfg, child):
            hits += 1
    return hits / trials


# -- kernel choosers ----------------------------------------------------------
#
# Each factory returns a chooser(rng) -> kernel closure over its samplers, so
# estimate_power stays agnostic of how selection data is obtained.


def median_chooser(sampler_p, m_sel: int):
    def choose(rng):
        return RbfKernel(median_heuristic(sampler_p(rng, m_sel)))
    return choose


def fixed_chooser(k):
    def choose(rng):
        return k
    return choose


def _shared_ratio_select(X, Y, sigma2_grid, B, rng) -> int:
    """max_ratio_select specialized to an RBF bandwidth grid: squared
    distances and bootstrap counts are computed once and shared."""
    dxx, dxy, dyy = sq_dists(X, X), sq_dists(X, Y), sq_dists(Y, Y)
    m = X.shape[0]
    cx = _bootstrap_counts(rng, B, m)
    cy = _bootstrap_counts(rng, B, m)
    best_idx, best_ratio = 0, -np.inf
    for i, s2 in enumerate(sigma2_grid):
        kxx = gram_from_sqdists(dxx, s2)
        kxy = gram_from_sqdists(dxy, s2)
        kyy = gram_from_sqdists(dyy, s2)
        value = mmd2_from_grams(kxx, kxy, kyy)
        var = max(float(np.var(_resampled_stats(kxx, kxy, kyy, cx, cy), ddof=1)), EPS_VAR)
        ratio = value / np.sqrt(var)
        if ratio > best_ratio:
            best_idx, best_ratio = i, ratio
    return best_idx


def max_ratio_chooser(sampler_p, sampler_q, m_sel: int, sigma2_grid, B: int = 100):
    """Pick the bandwidth maximizing M-hat / sqrt(V) on selection draws.

    m_sel bounds BOTH sides of the selection data, so a scarce target sample
    is modeled by passing a small m_sel.
    """
    grid = list(sigma2_grid)

    def choose(rng):
        X = sampler_p(rng, m_sel)
        Y = sampler_q(rng, m_sel)
        return RbfKernel(grid[_shared_ratio_select(X, Y, grid, B, rng)])
    return choose


def surrogate_chooser(sampler_p, sampler_g, m_sel: int, sigma2_grid,
                      criterion: str = "ratio", lam: float = 0.0, B: int = 100):
    """Pick the bandwidth from plentiful surrogate draws standing in for the
    scarce target sample.

    criterion "ratio" (default) plugs Z into the ratio rule: over a fixed
    candidate list the power bound's constants are kernel-independent, so the
    operational selection maximizes M-hat(X, Z) / sqrt(V).  criterion "bound"
    maximizes the un-normalized M-hat(X2, Z) - lam * M-hat(X1, X2) instead,
    which needs far larger selection samples before its noise stops dominating.
    """
    if criterion not in ("ratio", "bound"):
        raise ParameterError(f"unknown criterion {criterion!r}")
    grid = list(sigma2_grid)

    def choose_ratio(rng):
        X = sampler_p(rng, m_sel)
        Z = sampler_g(rng, m_sel)
        return RbfKernel(grid[_shared_ratio_select(X, Z, grid, B, rng)])

    def choose_bound(rng):
        x2 = sampler_p(rng, m_sel)
        z = sampler_g(rng, m_sel)
        d_x2x2, d_x2z, d_zz = sq_dists(x2, x2), sq_dists(x2, z), sq_dists(z, z)
        if lam > 0:
            x1 = sampler_p(rng, m_sel)
            d_x1x1, d_x1x2 = sq_dists(x1, x1), sq_dists(x1, x2)
        best_i, best = 0, -np.inf
        for i, s2 in enumerate(grid):
            obj = mmd2_from_grams(
                gram_from_sqdists(d_x2x2, s2),
                gram_from_sqdists(d_x2z, s2),
                gram_from_sqdists(d_zz, s2),
            )
            if lam > 0:
                obj -= lam * mmd2_from_grams(
                    gram_from_sqdists(d_x1x1, s2),
                    gram_from_sqdists(d_x1x2, s2),
                    gram_from_sqdists(d_x2x2, s2),
                )
            if obj > best:
                best_i, best = i, obj
        return RbfKernel(grid[best_i])

    return choose_ratio if criterion == "ratio" else choose_bound
