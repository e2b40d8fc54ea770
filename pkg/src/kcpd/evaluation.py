"""Dataset preparation and detection-quality metrics.

Normalization statistics always come from the training split alone and are
applied unchanged to validation and test, so no information leaks backward.
AUC is the Mann-Whitney statistic over (positive, negative) timestep pairs:
exact, deterministic, and tie-aware (ties count one half).
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .datasets import LabeledSeries
from .errors import MetricError, ParameterError


@dataclass
class EvalConfig:
    tolerance: int = 25
    fractions: tuple = (0.6, 0.2, 0.2)

    def __post_init__(self):
        if self.tolerance < 0:
            raise ParameterError(f"tolerance must be >= 0, got {self.tolerance}")
        if len(self.fractions) != 3 or any(f < 0 for f in self.fractions):
            raise ParameterError("fractions must be three nonnegative numbers")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ParameterError(f"fractions must sum to 1, got {sum(self.fractions)}")


@dataclass
class Normalizer:
    lo: np.ndarray
    hi: np.ndarray


def fit_normalizer(train_series) -> Normalizer:
    arr = np.asarray(train_series, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.size == 0:
        raise ParameterError("cannot fit a normalizer on an empty series")
    return Normalizer(lo=arr.min(axis=0), hi=arr.max(axis=0))


def apply_normalizer(series, nz: Normalizer) -> np.ndarray:
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    span = nz.hi - nz.lo
    out = np.empty_like(arr)
    for j in range(arr.shape[1]):
        if span[j] == 0.0:
            out[:, j] = 0.5  # constant training dimension carries no scale
        else:
            out[:, j] = (arr[:, j] - nz.lo[j]) / span[j]
    return out


def invert_normalizer(normed, nz: Normalizer) -> np.ndarray:
    arr = np.asarray(normed, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    span = nz.hi - nz.lo
    out = np.empty_like(arr)
    for j in range(arr.shape[1]):
        if span[j] == 0.0:
            out[:, j] = nz.lo[j]
        else:
            out[:, j] = arr[:, j] * span[j] + nz.lo[j]
    return out


def normalize(series):
    """Map each dimension into [0, 1]; returns the series and the transform."""
    nz = fit_normalizer(series)
    return apply_normalizer(series, nz), nz


def chrono_split(series, labels, fractions=(0.6, 0.2, 0.2)):
    """Contiguous train/validation/test pieces with labels reindexed locally."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ParameterError(f"fractions must sum to 1, got {sum(fractions)}")
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    T = arr.shape[0]
    n1 = int(fractions[0] * T)
    n2 = int(fractions[1] * T)
    bounds = [(0, n1), (n1, n1 + n2), (n1 + n2, T)]
    pieces = []
    for lo, hi in bounds:
        local = [t - lo for t in labels if lo <= t < hi]
        pieces.append(LabeledSeries(arr[lo:hi], local))
    return tuple(pieces)


def positive_mask(positions, labels, tolerance: int, two_sided: bool = False) -> np.ndarray:
    """True where a timestep falls inside some label's tolerance window.

    The window is forward-looking by default: a retrospective detector reacts
    after the change, so [t_label, t_label + tolerance] counts as a hit.
    """
    pos = np.asarray(positions, dtype=np.intp)
    mask = np.zeros(pos.shape[0], dtype=bool)
    for t in labels:
        lo = t - tolerance if two_sided else t
        mask |= (pos >= lo) & (pos <= t + tolerance)
    return mask


def roc_auc(scores, positions, labels, tolerance: int, two_sided: bool = False) -> float:
    """Mann-Whitney AUC of scores against tolerance-windowed labels."""
    scores = np.asarray(scores, dtype=np.float64)
    pos = positive_mask(positions, labels, tolerance, two_sided)
    n_pos = int(pos.sum())
    n_neg = int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricError(f"degenerate evaluation: {n_pos} positives, {n_neg} negatives")
    ranks = rankdata(scores)  # average ranks, so ties contribute 1/2
    r_pos = ranks[pos].sum()
    return float((r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def write_report(path, mapping) -> None:
    """Flat key=value metrics file, one entry per line."""
    with open(path, "w") as fh:
        for key, val in mapping.items():
            fh.write(f"{key}={val}\n")


def read_report(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, val = line.partition("=")
            out[key] = val
    return out
