"""Maximum mean discrepancy estimators and kernel-selection criteria.

The central quantity is the unbiased U-statistic estimate of squared MMD
between two equal-size sample sets.  On top of it sit a bootstrap variance
estimate, the ratio criterion for picking a kernel from a candidate list,
and the lower-bound objective that trades surrogate separation against
within-sample variation.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ParameterError
from .kernels import DeepKernel, RbfKernel, as_samples, deep_eval, gram, gram_tensor

EPS_VAR = 1e-8


@dataclass
class MmdEstimate:
    value: float
    m: int
    variance: float | None = None


def _grams(X, Y, k):
    if isinstance(k, DeepKernel):
        return deep_eval(X, X, k), deep_eval(X, Y, k), deep_eval(Y, Y, k)
    return gram(X, X, k), gram(X, Y, k), gram(Y, Y, k)


def _check_sides(X, Y):
    X, Y = as_samples(X), as_samples(Y)
    if X.shape[0] != Y.shape[0]:
        raise ParameterError(f"equal sample counts required, got {X.shape[0]} and {Y.shape[0]}")
    if X.shape[0] < 2:
        raise ParameterError(f"need at least 2 samples per side, got {X.shape[0]}")
    return X, Y


def mmd2_from_grams(kxx: np.ndarray, kxy: np.ndarray, kyy: np.ndarray) -> float:
    """Unbiased squared-MMD from precomputed Gram blocks.

    Within-block sums drop the diagonal; the grouping below keeps the result
    exactly zero when every kernel entry is 1 (constant data).
    """
    m = kxx.shape[0]
    within_x = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    within_y = (kyy.sum() - np.trace(kyy)) / (m * (m - 1))
    cross = 2.0 * (kxy.sum() / (m * m))
    return float(within_x + within_y - cross)


def mmd2_unbiased(X, Y, k) -> float:
    """U-statistic estimate of squared MMD; may be negative, bounded by 2 for k <= 1."""
    X, Y = _check_sides(X, Y)
    return mmd2_from_grams(*_grams(X, Y, k))


def mmd2_unbiased_t(hx: ad.Tensor, hy: ad.Tensor, sigma2: float) -> ad.Tensor:
    """Differentiable U-statistic on encoded rows (one sample per row)."""
    m = hx.shape[0]
    if hy.shape[0] != m:
        raise ParameterError(f"equal sample counts required, got {m} and {hy.shape[0]}")
    if m < 2:
        raise ParameterError(f"need at least 2 samples per side, got {m}")
    eye = np.eye(m)
    kxx = gram_tensor(hx, hx, sigma2)
    kyy = gram_tensor(hy, hy, sigma2)
    kxy = gram_tensor(hx, hy, sigma2)
    coef = 1.0 / (m * (m - 1))
    within_x = (ad.tsum(kxx) - ad.tsum(kxx * eye)) * coef
    within_y = (ad.tsum(kyy) - ad.tsum(kyy * eye)) * coef
    cross = ad.tsum(kxy) * (2.0 / (m * m))
    return within_x + within_y - cross


def mmd2_pairs(HX: np.ndarray, HY: np.ndarray, sigma2: float) -> np.ndarray:
    """Unbiased squared-MMD per row-aligned sample-set pair.

    HX, HY are (B, m, d) stacks; pair b compares HX[b] against HY[b] under an
    RBF kernel of the given bandwidth.  Term grouping matches mmd2_from_grams
    so constant pairs score exactly zero.
    """
    HX = np.asarray(HX, dtype=np.float64)
    HY = np.asarray(HY, dtype=np.float64)
    if HX.shape != HY.shape or HX.ndim != 3:
        raise ParameterError(f"need matching (B, m, d) stacks, got {HX.shape} and {HY.shape}")
    m = HX.shape[1]
    if m < 2:
        raise ParameterError(f"need at least 2 samples per side, got {m}")

    def grams(A, B_):
        d2 = ((A[:, :, None, :] - B_[:, None, :, :]) ** 2).sum(axis=3)
        return np.exp(d2 / (-2.0 * sigma2))

    kxx, kxy, kyy = grams(HX, HX), grams(HX, HY), grams(HY, HY)
    within_x = (kxx.sum(axis=(1, 2)) - np.trace(kxx, axis1=1, axis2=2)) / (m * (m - 1))
    within_y = (kyy.sum(axis=(1, 2)) - np.trace(kyy, axis1=1, axis2=2)) / (m * (m - 1))
    cross = 2.0 * (kxy.sum(axis=(1, 2)) / (m * m))
    return within_x + within_y - cross


def _bootstrap_counts(rng, B: int, m: int) -> np.ndarray:
    """B rows of multiset counts from resampling m items with replacement."""
    idx = rng.integers(0, m, size=(B, m))
    counts = np.zeros((B, m))
    for b in range(B):
        counts[b] = np.bincount(idx[b], minlength=m)
    return counts


def _resampled_stats(kxx, kxy, kyy, cx, cy) -> np.ndarray:
    """Vector of U-statistics for count-encoded resamples of each side."""
    m = kxx.shape[0]
    qxx = ((cx @ kxx) * cx).sum(axis=1) - cx @ np.diag(kxx)
    qyy = ((cy @ kyy) * cy).sum(axis=1) - cy @ np.diag(kyy)
    qxy = ((cx @ kxy) * cy).sum(axis=1)
    return (qxx + qyy) / (m * (m - 1)) - 2.0 * qxy / (m * m)


def mmd2_variance(X, Y, k, B: int = 500, rng=None) -> float:
    """Bootstrap variance of the MMD estimate, floored at EPS_VAR.

    Each side is resampled with replacement B times; the spread of the
    recomputed statistics estimates Var[M-hat].  Gram matrices are computed
    once and resamples are applied through count vectors.
    """
    X, Y = _check_sides(X, Y)
    if X.shape[0] < 4:
        raise ParameterError(f"variance estimate needs m >= 4, got {X.shape[0]}")
    if B < 100:
        raise ParameterError(f"need B >= 100 resamples, got {B}")
    rng = np.random.default_rng() if rng is None else rng
    kxx, kxy, kyy = _grams(X, Y, k)
    m = kxx.shape[0]
    cx = _bootstrap_counts(rng, B, m)
    cy = _bootstrap_counts(rng, B, m)
    vals = _resampled_stats(kxx, kxy, kyy, cx, cy)
    return max(float(np.var(vals, ddof=1)), EPS_VAR)


def mmd2_estimate(X, Y, k, B: int | None = None, rng=None) -> MmdEstimate:
    X, Y = _check_sides(X, Y)
    var = None if B is None else mmd2_variance(X, Y, k, B=B, rng=rng)
    return MmdEstimate(value=mmd2_unbiased(X, Y, k), m=X.shape[0], variance=var)


def max_ratio_select(X, Y, kernel_list, B: int = 500, rng=None) -> int:
    """Index of the kernel maximizing M-hat / sqrt(max(V, EPS_VAR)).

    Ties break toward the smallest index.  All candidates see the same
    bootstrap resamples (common random numbers), which removes resampling
    noise from the comparison.
    """
    if len(kernel_list) == 0:
        raise ParameterError("kernel list is empty")
    X, Y = _check_sides(X, Y)
    if X.shape[0] < 4:
        raise ParameterError(f"ratio selection needs m >= 4, got {X.shape[0]}")
    rng = np.random.default_rng() if rng is None else rng
    m = X.shape[0]
    cx = _bootstrap_counts(rng, B, m)
    cy = _bootstrap_counts(rng, B, m)
    best_idx, best_ratio = 0, -np.inf
    for i, k in enumerate(kernel_list):
        kxx, kxy, kyy = _grams(X, Y, k)
        value = mmd2_from_grams(kxx, kxy, kyy)
        var = max(float(np.var(_resampled_stats(kxx, kxy, kyy, cx, cy), ddof=1)), EPS_VAR)
        ratio = value / np.sqrt(var)
        if ratio > best_ratio:
            best_idx, best_ratio = i, ratio
    return best_idx


def power_bound_objective(X_l, X_r, Z, dk, lam: float) -> float:
    """Surrogate separation minus lam times within-sample variation.

    This is the quantity the kernel parameters are trained to maximize: the
    estimated MMD between the current window and the generated surrogate,
    discounted by the MMD between the two consecutive real windows.
    """
    if lam < 0:
        raise ParameterError(f"lambda must be nonnegative, got {lam}")
    return mmd2_unbiased(X_r, Z, dk) - lam * mmd2_unbiased(X_l, X_r, dk)
