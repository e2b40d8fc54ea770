"""Retrospective change-point scoring over sliding window pairs.

A pair at time t holds the past window [t-w_l, t) and the current window
[t, t+w_r); its score is the unbiased squared MMD between the two windows'
encoded samples.  Higher scores mark likelier change points.  The learned
generator plays no role here: scoring only needs the kernel.
"""

from dataclasses import dataclass

import numpy as np

from . import models
from .errors import ConfigError, DataError, ParameterError
from .kernels import DeepKernel, median_heuristic
from .mmd import mmd2_pairs

MODES = ("dataspace", "codespace", "negsample", "adversarial")
BANDWIDTH_MAX_ROWS = 2000
_CHUNK = 256


@dataclass(frozen=True)
class WindowPair:
    t: int
    X_l: np.ndarray
    X_r: np.ndarray


@dataclass(frozen=True)
class ScoreSeries:
    positions: np.ndarray
    scores: np.ndarray

    def __len__(self):
        return len(self.positions)


def _as_series(series) -> np.ndarray:
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ParameterError("series must be a nonempty (T, d) array")
    return arr


def sliding_pairs(series, w_l: int, w_r: int, stride: int = 1) -> list:
    """All window pairs at t = w_l, w_l+stride, ... while both windows fit."""
    arr = _as_series(series)
    if w_l < 1 or w_r < 1:
        raise ParameterError(f"window sizes must be >= 1, got {w_l}, {w_r}")
    if stride < 1:
        raise ParameterError(f"stride must be >= 1, got {stride}")
    t_total = arr.shape[0]
    if t_total < w_l + w_r:
        raise ParameterError(f"series length {t_total} shorter than {w_l + w_r}")
    pairs = []
    for t in range(w_l, t_total - w_r + 1, stride):
        pairs.append(WindowPair(t, arr[t - w_l:t], arr[t:t + w_r]))
    return pairs


def partition_bandwidth(encoder, series: np.ndarray, w: int, burnin: int = 0) -> float:
    """Median-heuristic bandwidth over encodings of the non-overlapping
    window partition of the series, deterministically subsampled."""
    series = _as_series(series)
    starts = range(0, series.shape[0] - w + 1, w)
    wins = np.stack([series[s:s + w] for s in starts])
    if encoder is not None:
        wins = models.encode_windows(encoder, wins, burnin=burnin)
    rows = wins.reshape(-1, wins.shape[-1])
    if rows.shape[0] > BANDWIDTH_MAX_ROWS:
        step = -(-rows.shape[0] // BANDWIDTH_MAX_ROWS)
        rows = rows[::step]
    return median_heuristic(rows)


def score_series(series, mode: str, dk: DeepKernel = None, gen=None,
                 w: int = 25, stride: int = 1, burnin: int | None = None) -> ScoreSeries:
    """Score every window pair of the series under the given ablation mode.

    "dataspace" compares raw windows; the trained modes compare encoded
    windows.  Bandwidth is re-derived from this series by partition_bandwidth,
    so scores adapt to the scored split while staying deterministic.  burnin
    defaults to w and must match the value used in training; pass 0 to encode
    from a cold zero state.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}, expected one of {MODES}")
    arr = _as_series(series)
    if mode == "dataspace":
        encoder = None
    else:
        if dk is None or dk.encoder is None:
            raise ConfigError(f"mode {mode!r} needs a DeepKernel with a trained encoder")
        encoder = dk.encoder
    if not np.isfinite(arr).all():
        raise DataError("series contains non-finite values")
    t_total = arr.shape[0]
    if t_total < 2 * w:
        raise ParameterError(f"series length {t_total} shorter than one window pair {2 * w}")
    r = w if burnin is None else burnin
    if r < 0:
        raise ParameterError(f"burnin must be >= 0, got {r}")

    starts = np.arange(0, t_total - w + 1)
    wins = np.stack([arr[s:s + w] for s in starts])
    H = models.encode_windows(encoder, wins, burnin=r) if encoder is not None else wins
    sigma2 = partition_bandwidth(encoder, arr, w, burnin=r)

    positions = np.arange(w, t_total - w + 1, stride)
    scores = np.empty(len(positions))
    for lo in range(0, len(positions), _CHUNK):
        pos = positions[lo:lo + _CHUNK]
        scores[lo:lo + len(pos)] = mmd2_pairs(H[pos - w], H[pos], sigma2)
    return ScoreSeries(positions=positions, scores=scores)


def save_scores(path, ss: ScoreSeries) -> None:
    with open(path, "w") as fh:
        fh.write("t,score\n")
        for t, s in zip(ss.positions, ss.scores):
            fh.write(f"{int(t)},{s:.17g}\n")


def load_scores(path) -> ScoreSeries:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "t,score":
            raise DataError(f"unexpected score header {header!r}")
        ts, vals = [], []
        for line in fh:
            if not line.strip():
                continue
            a, b = line.split(",")
            ts.append(int(a))
            vals.append(float(b))
    return ScoreSeries(positions=np.asarray(ts, dtype=int),
                       scores=np.asarray(vals, dtype=np.float64))
