"""RBF kernels, median-heuristic bandwidths, Gram matrices, and deep kernels.

A deep kernel composes a fixed RBF with a learned recurrent encoder: windows
of raw observations are mapped to per-timestep hidden states and the RBF is
evaluated between those states.  With no encoder attached the deep kernel
degrades to the plain RBF on raw vectors, which doubles as the untrained
baseline in the detection pipeline.
"""

import numpy as np
from scipy.spatial.distance import cdist, pdist

from . import autodiff as ad
from .errors import ParameterError, ShapeError


def as_samples(X) -> np.ndarray:
    """Coerce input to an (n, d) float64 sample matrix; 1-D means n scalars."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeError(f"samples must be (n, d), got ndim={arr.ndim}")
    return arr


def rbf_eval(x, y, sigma2: float) -> float:
    """exp(-||x - y||^2 / (2 sigma2)) for a single pair of vectors."""
    if sigma2 <= 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    xv = np.asarray(x, dtype=np.float64).ravel()
    yv = np.asarray(y, dtype=np.float64).ravel()
    if xv.shape != yv.shape:
        raise ShapeError(f"vector dims differ: {xv.shape} vs {yv.shape}")
    d2 = float(np.sum((xv - yv) ** 2))
    return float(np.exp(-d2 / (2.0 * sigma2)))


def median_heuristic(samples) -> float:
    """Half the median pairwise squared distance over distinct unordered pairs.

    Falls back to half the smallest positive squared distance when the median
    is zero, and to 1.0 when every pair coincides.
    """
    X = as_samples(samples)
    if X.shape[0] < 2:
        raise ParameterError(f"need at least 2 samples, got {X.shape[0]}")
    d2 = pdist(X, "sqeuclidean")
    med = float(np.median(d2))
    if med > 0.0:
        return med / 2.0
    positive = d2[d2 > 0.0]
    if positive.size:
        return float(positive.min()) / 2.0
    return 1.0


class RbfKernel:
    """Gaussian kernel with an explicit squared bandwidth."""

    def __init__(self, sigma2: float):
        if not np.isfinite(sigma2) or sigma2 <= 0:
            raise ParameterError(f"sigma2 must be positive and finite, got {sigma2}")
        self.sigma2 = float(sigma2)

    def __call__(self, x, y) -> float:
        return rbf_eval(x, y, self.sigma2)

    def gram(self, X, Y) -> np.ndarray:
        X, Y = as_samples(X), as_samples(Y)
        if X.shape[1] != Y.shape[1]:
            raise ShapeError(f"sample dims differ: {X.shape[1]} vs {Y.shape[1]}")
        # cdist's sqeuclidean takes actual differences, so the X=Y diagonal is
        # an exact zero and k(x, x) = 1 exactly.
        return np.exp(cdist(X, Y, "sqeuclidean") / (-2.0 * self.sigma2))

    def __repr__(self):
        return f"RbfKernel(sigma2={self.sigma2!r})"


def gram(X, Y, k) -> np.ndarray:
    """Gram matrix G[i, j] = k(x_i, y_j) for sample matrices X, Y."""
    if isinstance(k, RbfKernel):
        return k.gram(X, Y)
    X, Y = as_samples(X), as_samples(Y)
    if X.shape[1] != Y.shape[1]:
        raise ShapeError(f"sample dims differ: {X.shape[1]} vs {Y.shape[1]}")
    out = np.empty((X.shape[0], Y.shape[0]))
    for i in range(X.shape[0]):
        for j in range(Y.shape[0]):
            out[i, j] = k(X[i], Y[j])
    return out


def gram_from_sqdists(d2: np.ndarray, sigma2: float) -> np.ndarray:
    """RBF Gram from a precomputed squared-distance matrix (shared across bandwidths)."""
    if sigma2 <= 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    return np.exp(d2 / (-2.0 * sigma2))


def sq_dists(X, Y) -> np.ndarray:
    X, Y = as_samples(X), as_samples(Y)
    if X.shape[1] != Y.shape[1]:
        raise ShapeError(f"sample dims differ: {X.shape[1]} vs {Y.shape[1]}")
    return cdist(X, Y, "sqeuclidean")


def gram_tensor(hx: ad.Tensor, hy: ad.Tensor, sigma2: float) -> ad.Tensor:
    """Differentiable RBF Gram between encoded rows of hx and hy.

    sigma2 is a plain float: bandwidths are refreshed outside the recorded
    graph, so no gradient flows through the heuristic.
    """
    if sigma2 <= 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    sx = ad.tsum(ad.mul(hx, hx), axis=1)            # (n, 1)
    sy = ad.tsum(ad.mul(hy, hy), axis=1)            # (m, 1)
    cross = ad.matmul(hx, ad.transpose(hy))         # (n, m)
    d2 = sx + ad.transpose(sy) + cross * (-2.0)
    return ad.exp(d2 * (-1.0 / (2.0 * sigma2)))


class DeepKernel:
    """RBF composed with a recurrent window encoder.

    ``encoder`` and ``decoder`` are ParamStores holding the GRU maps phi
    (windows to hidden-state sequences) and psi (hidden states back to data
    space; used only by the reconstruction penalty during training).  Both
    may be None, which makes the kernel act directly on raw vectors.
    """

    def __init__(self, rbf: RbfKernel, encoder=None, decoder=None):
        self.rbf = rbf
        self.encoder = encoder
        self.decoder = decoder
        if encoder is not None:
            d_h = encoder["u_z"].data.shape[0]
            self.d_in = encoder["w_z"].data.shape[0]
            self.d_h = d_h
            if decoder is not None:
                if decoder["w_z"].data.shape[0] != d_h:
                    raise ShapeError("decoder input dim must equal encoder hidden dim")
                if decoder["head_w"].data.shape[1] != self.d_in:
                    raise ShapeError("decoder head must map back to the data dim")
        else:
            self.d_in = None
            self.d_h = None

    def encode(self, windows: np.ndarray) -> np.ndarray:
        """(B, w, d) windows -> (B, w, d_h) hidden states (identity if no encoder)."""
        windows = np.asarray(windows, dtype=np.float64)
        if self.encoder is None:
            return windows
        from .models import encode_windows
        return encode_windows(self.encoder, windows)


def deep_eval(X, Y, dk: DeepKernel) -> np.ndarray:
    """Gram matrix between the encoded timesteps of two windows."""
    X, Y = as_samples(X), as_samples(Y)
    if dk.encoder is None:
        return gram(X, Y, dk.rbf)
    hx = dk.encode(X[None])[0]
    hy = dk.encode(Y[None])[0]
    return gram(hx, hy, dk.rbf)
