"""Synthetic change-point datasets with ground-truth labels, plus CSV I/O.

Series files use the schema ``t,x0,x1,...`` (one row per timestep); labels
live in a sidecar file with one change-point index per line.  All generators
are deterministic functions of their seed.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParameterError

BLOB_GRID = np.array([0.0, 15.0, 30.0, 45.0, 60.0])
SEGMENT_BASE = 100
SEGMENT_JITTER_STD = 10.0
SEGMENT_MIN = 50


@dataclass
class LabeledSeries:
    series: np.ndarray  # (T, d)
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.series = np.asarray(self.series, dtype=np.float64)
        if self.series.ndim == 1:
            self.series = self.series.reshape(-1, 1)
        self.labels = [int(t) for t in self.labels]
        T = self.series.shape[0]
        prev = -1
        for t in self.labels:
            if not (0 <= t < T) or t <= prev:
                raise ParameterError(f"labels must be strictly increasing within [0, {T})")
            prev = t


def gen_blobs(epsilon: float, n: int, seed) -> np.ndarray:
    """n points from a 25-blob grid mixture with within-blob correlation.

    Blob centers sit on the 5x5 grid {0,15,30,45,60}^2; each blob is a unit-
    variance Gaussian with off-diagonal covariance rho = (eps-1)/(eps+1), so
    eps = 1 recovers the uncorrelated reference distribution.
    """
    if epsilon < 1:
        raise ParameterError(f"epsilon must be >= 1, got {epsilon}")
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    rho = (epsilon - 1.0) / (epsilon + 1.0)
    # Cholesky factor of [[1, rho], [rho, 1]]
    L = np.array([[1.0, 0.0], [rho, np.sqrt(1.0 - rho * rho)]])
    centers_x = BLOB_GRID[rng.integers(0, 5, size=n)]
    centers_y = BLOB_GRID[rng.integers(0, 5, size=n)]
    z = rng.standard_normal(size=(n, 2))
    return np.column_stack([centers_x, centers_y]) + z @ L.T


def _segment_index(rng, T: int, jitter_std: float) -> tuple[np.ndarray, list]:
    """Per-timestep segment numbers (1-based) and the change-point indices.

    Segment lengths are SEGMENT_BASE plus integer-rounded Gaussian jitter,
    floored at SEGMENT_MIN.
    """
    seg_of_t = np.empty(T, dtype=np.intp)
    labels = []
    t, n = 0, 1
    while t < T:
        length = SEGMENT_BASE
        if jitter_std > 0:
            length = max(SEGMENT_MIN, SEGMENT_BASE + int(round(rng.normal(0.0, jitter_std))))
        end = min(t + length, T)
        seg_of_t[t:end] = n
        if t > 0:
            labels.append(t)
        t, n = end, n + 1
    return seg_of_t, labels


def _ar2(noise: np.ndarray) -> np.ndarray:
    """y(t) = 0.6 y(t-1) - 0.5 y(t-2) + e_t with y(0) = y(1) = 0."""
    T = noise.shape[0]
    y = np.zeros(T)
    for t in range(2, T):
        y[t] = 0.6 * y[t - 1] - 0.5 * y[t - 2] + noise[t]
    return y


def _mu_schedule(n_segments: int) -> np.ndarray:
    # mu_1 = 0, mu_n = mu_{n-1} + n/16
    mu = np.zeros(n_segments + 1)
    for n in range(2, n_segments + 1):
        mu[n] = mu[n - 1] + n / 16.0
    return mu


def gen_jumping_mean(seed, T: int = 5000, jitter_std: float = SEGMENT_JITTER_STD) -> LabeledSeries:
    """AR(2) series whose noise mean jumps upward at each segment boundary."""
    rng = np.random.default_rng(seed)
    seg, labels = _segment_index(rng, T, jitter_std)
    mu = _mu_schedule(int(seg.max()))
    noise = rng.normal(0.0, 1.5, size=T) + mu[seg]
    y = _ar2(noise)
    y[0] = y[1] = 0.0
    return LabeledSeries(y, labels)


def gen_scaling_variance(seed, T: int = 5000, jitter_std: float = SEGMENT_JITTER_STD) -> LabeledSeries:
    """AR(2) series whose noise std alternates between 1 and ln(e + n/4)."""
    rng = np.random.default_rng(seed)
    seg, labels = _segment_index(rng, T, jitter_std)
    n_seg = int(seg.max())
    sigma = np.array([1.0 if n % 2 == 1 else np.log(np.e + n / 4.0) for n in range(n_seg + 1)])
    noise = rng.normal(0.0, 1.0, size=T) * sigma[seg]
    y = _ar2(noise)
    y[0] = y[1] = 0.0
    return LabeledSeries(y, labels)


def _mixture_draw(rng, n, means, stds, weights) -> np.ndarray:
    comp = rng.choice(len(weights), size=n, p=weights)
    return rng.normal(np.asarray(means)[comp], np.asarray(stds)[comp])


def gen_gaussian_mixtures(seed, T: int = 3000) -> LabeledSeries:
    """Alternates every 100 steps between two 1-D Gaussian mixtures."""
    rng = np.random.default_rng(seed)
    y = np.empty(T)
    labels = []
    for start in range(0, T, SEGMENT_BASE):
        n = min(SEGMENT_BASE, T - start)
        if (start // SEGMENT_BASE) % 2 == 0:
            y[start:start + n] = _mixture_draw(rng, n, [-1.0, 1.0], [0.5, 0.5], [0.5, 0.5])
        else:
            y[start:start + n] = _mixture_draw(rng, n, [-1.0, 1.0], [1.0, 0.1], [0.8, 0.2])
        if start > 0:
            labels.append(start)
    return LabeledSeries(y, labels)


def gen_highdim_variance(d: int, seed, T: int = 3000) -> LabeledSeries:
    """d-dimensional zero-mean Gaussians alternating std 0.75 / 1.25 every 100 steps."""
    if d < 1:
        raise ParameterError(f"d must be >= 1, got {d}")
    rng = np.random.default_rng(seed)
    x = np.empty((T, d))
    labels = []
    for start in range(0, T, SEGMENT_BASE):
        n = min(SEGMENT_BASE, T - start)
        std = 0.75 if (start // SEGMENT_BASE) % 2 == 0 else 1.25
        x[start:start + n] = rng.normal(0.0, std, size=(n, d))
        if start > 0:
            labels.append(start)
    return LabeledSeries(x, labels)


GENERATORS = {
    "jumping-mean": gen_jumping_mean,
    "scaling-variance": gen_scaling_variance,
    "gaussian-mixtures": gen_gaussian_mixtures,
}


def make_dataset(name: str, seed, **kwargs) -> LabeledSeries:
    """Build a labeled dataset by name; highdim takes a ``d`` keyword."""
    if name == "highdim":
        if "d" not in kwargs:
            raise ParameterError("highdim dataset needs d")
        return gen_highdim_variance(kwargs.pop("d"), seed, **kwargs)
    if name not in GENERATORS:
        raise ParameterError(f"unknown dataset {name!r}; choose from "
                             f"{sorted(GENERATORS) + ['highdim']}")
    return GENERATORS[name](seed, **kwargs)


# -- CSV series format --------------------------------------------------------

# %.17g round-trips float64 exactly, keeping rewrites byte-identical.
_FLOAT_FMT = "%.17g"


def save_series(path, series: np.ndarray) -> None:
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    header = "t," + ",".join(f"x{j}" for j in range(arr.shape[1]))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for t, row in enumerate(arr):
            fh.write(str(t) + "," + ",".join(_FLOAT_FMT % v for v in row) + "\n")


def load_series(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("t,"):
            raise DataError(f"{path}: expected header starting with 't,', got {header!r}")
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                rows.append([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise DataError(f"{path}: bad row {line!r}") from exc
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def save_labels(path, labels) -> None:
    with open(path, "w") as fh:
        for t in labels:
            fh.write(f"{int(t)}\n")


def load_labels(path) -> list:
    labels = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError as exc:
                raise DataError(f"{path}: bad label line {line!r}") from exc
    return labels
