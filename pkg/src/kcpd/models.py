"""Recurrent sequence models: window encoder, decoder, and surrogate generator.

All models are single-layer GRUs with the reset/update-gate equations

    z = sigmoid(x W_z + h U_z + b_z)
    r = sigmoid(x W_r + h U_r + b_r)
    hc = tanh(x W_h + (r * h) U_h + b_h)
    h' = (1 - z) * h + z * hc

acting on row-vector states, so a batch is a (B, d) matrix and weights have
shape (d_in, d_h).  Two forward routes exist: a recorded route on autodiff
Tensors for training and a plain ndarray route for scoring, kept in lockstep
by tests.
"""

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .errors import ParameterError, ShapeError

INIT_SCALE = 0.08
GATE_KEYS = ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h")


def init_gru_params(store: ParamStore, d_in: int, d_h: int, rng, prefix: str = "") -> None:
    """Register one GRU layer's weights: uniform(-0.08, 0.08), zero biases."""
    for gate in ("z", "r", "h"):
        store.add(prefix + f"w_{gate}", rng.uniform(-INIT_SCALE, INIT_SCALE, size=(d_in, d_h)))
        store.add(prefix + f"u_{gate}", rng.uniform(-INIT_SCALE, INIT_SCALE, size=(d_h, d_h)))
        store.add(prefix + f"b_{gate}", np.zeros((1, d_h)))


def init_encoder(d: int, d_h: int, rng) -> ParamStore:
    store = ParamStore()
    init_gru_params(store, d, d_h, rng)
    return store


def init_decoder(d: int, d_h: int, rng) -> ParamStore:
    """Decoder GRU over hidden-state inputs plus an affine head back to data space."""
    store = ParamStore()
    init_gru_params(store, d_h, d_h, rng)
    store.add("head_w", rng.uniform(-INIT_SCALE, INIT_SCALE, size=(d_h, d)))
    store.add("head_b", np.zeros((1, d)))
    return store


class GeneratorParams:
    """Seq2Seq surrogate generator: condition on the past window, emit a fake
    current window, with additive noise on the handed-over hidden state.

    Encoder and decoder live in one store under ``enc.`` / ``dec.`` prefixes
    so a single optimizer can drive all of theta.
    """

    def __init__(self, d: int, d_h: int, rng, noise_dist: str = "normal"):
        if noise_dist not in ("normal", "uniform"):
            raise ParameterError(f"unknown noise distribution {noise_dist!r}")
        self.d = d
        self.d_h = d_h
        self.noise_dist = noise_dist
        self.params = ParamStore()
        init_gru_params(self.params, d, d_h, rng, prefix="enc.")
        init_gru_params(self.params, d, d_h, rng, prefix="dec.")
        self.params.add("dec.head_w", rng.uniform(-INIT_SCALE, INIT_SCALE, size=(d_h, d)))
        self.params.add("dec.head_b", np.zeros((1, d)))

    def draw_noise(self, rng, batch: int = 1) -> np.ndarray:
        if self.noise_dist == "uniform":
            return rng.uniform(-1.0, 1.0, size=(batch, self.d_h))
        return rng.standard_normal(size=(batch, self.d_h))


# -- recorded (Tensor) route -------------------------------------------------


def gru_cell(params: ParamStore, x: Tensor, h: Tensor, prefix: str = "") -> Tensor:
    z = ad.sigmoid(x @ params[prefix + "w_z"] + h @ params[prefix + "u_z"] + params[prefix + "b_z"])
    r = ad.sigmoid(x @ params[prefix + "w_r"] + h @ params[prefix + "u_r"] + params[prefix + "b_r"])
    hc = ad.tanh(x @ params[prefix + "w_h"] + (r * h) @ params[prefix + "u_h"] + params[prefix + "b_h"])
    return (1.0 - z) * h + z * hc


def _burnin_order(w: int, burnin: int) -> list:
    """Timestep indices of the cyclic warm-up prefix: the periodic extension
    of the window, ending on its last step just before the real pass."""
    if burnin == 0:
        return []
    reps = -(-burnin // w)
    return (list(range(w)) * reps)[-burnin:]


def encode_sequence(phi: ParamStore, xs: list, prefix: str = "", burnin: int = 0) -> list:
    """Run the GRU over timestep batches from a zero state; return all states.

    With burnin > 0 the window is replayed cyclically for burnin extra steps
    before the real pass, and those warm-up states are dropped from the
    output.  The hidden state then enters the window as if it had just lived
    through it, so the returned states describe the window's own regime
    rather than the transient climb out of the origin, and two windows with
    near-identical contents receive near-identical encodings.
    """
    if not xs:
        raise ParameterError("empty input sequence")
    d_h = phi[prefix + "u_z"].data.shape[0]
    h = Tensor(np.zeros((xs[0].shape[0], d_h)))
    states = []
    seq = list(xs)
    for x in [seq[j] for j in _burnin_order(len(seq), burnin)] + seq:
        h = gru_cell(phi, x, h, prefix)
        states.append(h)
    return states[burnin:]


def decode_sequence(psi: ParamStore, hs: list) -> list:
    """Decoder GRU over hidden-state inputs, affine head applied per timestep."""
    outs = []
    for s in encode_sequence(psi, hs):
        outs.append(s @ psi["head_w"] + psi["head_b"])
    return outs


def generate_sequence(gen: GeneratorParams, xl: list, xr: list, omega: Tensor) -> list:
    """Encode the past window, perturb the handover state by omega, then decode
    teacher-forced on the right-shifted current window."""
    if len(xl) != len(xr):
        raise ShapeError(f"window lengths differ: {len(xl)} vs {len(xr)}")
    p = gen.params
    batch = xl[0].shape[0]
    h = Tensor(np.zeros((batch, gen.d_h)))
    for x in xl:
        h = gru_cell(p, x, h, "enc.")
    h = h + omega
    zero_step = Tensor(np.zeros((batch, gen.d)))
    outs = []
    for t in range(len(xr)):
        inp = zero_step if t == 0 else xr[t - 1]
        h = gru_cell(p, inp, h, "dec.")
        outs.append(h @ p["dec.head_w"] + p["dec.head_b"])
    return outs


# -- plain ndarray route (scoring and inspection) -----------------------------


def _sigmoid_np(x):
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


def gru_cell_np(params: ParamStore, x: np.ndarray, h: np.ndarray, prefix: str = "") -> np.ndarray:
    p = lambda k: params[prefix + k].data
    if x.shape[1] != p("w_z").shape[0]:
        raise ShapeError(f"input dim {x.shape[1]} vs weight dim {p('w_z').shape[0]}")
    z = _sigmoid_np(x @ p("w_z") + h @ p("u_z") + p("b_z"))
    r = _sigmoid_np(x @ p("w_r") + h @ p("u_r") + p("b_r"))
    hc = np.tanh(x @ p("w_h") + (r * h) @ p("u_h") + p("b_h"))
    return (1.0 - z) * h + z * hc


def _as_window_batch(windows) -> np.ndarray:
    arr = np.asarray(windows, dtype=np.float64)
    if arr.ndim != 3:
        raise ShapeError(f"expected (B, w, d) windows, got ndim={arr.ndim}")
    return arr


def encode_windows(phi: ParamStore, windows, prefix: str = "", burnin: int = 0) -> np.ndarray:
    """(B, w, d) -> (B, w, d_h): all hidden states, batched over windows.

    burnin replays the first timestep before the window and drops the warm-up
    states, mirroring encode_sequence.
    """
    xs = _as_window_batch(windows)
    b, w, _ = xs.shape
    d_h = phi[prefix + "u_z"].data.shape[0]
    h = np.zeros((b, d_h))
    for _ in range(burnin):
        h = gru_cell_np(phi, xs[:, 0, :], h, prefix)
    out = np.empty((b, w, d_h))
    for t in range(w):
        h = gru_cell_np(phi, xs[:, t, :], h, prefix)
        out[:, t, :] = h
    return out


def encode_window(X, phi: ParamStore) -> np.ndarray:
    """Single (w, d) window -> (w, d_h) hidden-state sequence."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"expected (w, d) window, got ndim={X.ndim}")
    return encode_windows(phi, X[None])[0]


def reconstruct_windows(psi: ParamStore, hidden) -> np.ndarray:
    """(B, w, d_h) hidden states -> (B, w, d) reconstructions."""
    hs = _as_window_batch(hidden)
    states = encode_windows(psi, hs)
    return states @ psi["head_w"].data + psi["head_b"].data


def reconstruct(H, psi: ParamStore) -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2:
        raise ShapeError(f"expected (w, d_h) hidden sequence, got ndim={H.ndim}")
    return reconstruct_windows(psi, H[None])[0]


def reconstruction_loss(phi: ParamStore, psi: ParamStore, windows) -> float:
    """Mean squared reconstruction norm per window, averaged over the batch."""
    xs = _as_window_batch(windows)
    rec = reconstruct_windows(psi, encode_windows(phi, xs))
    return float(((xs - rec) ** 2).sum(axis=(1, 2)).mean())


def shift_right_one(X: np.ndarray) -> np.ndarray:
    """{x_t, ..., x_{t+w-1}} -> {0, x_t, ..., x_{t+w-2}}."""
    out = np.zeros_like(X)
    out[1:] = X[:-1]
    return out


def generate_windows(gen: GeneratorParams, XL, XR, omegas) -> np.ndarray:
    """Ndarray twin of generate_sequence, batched: (B, w, d) pairs plus
    (B, d_h) noise -> (B, w, d) surrogate windows."""
    XL = _as_window_batch(XL)
    XR = _as_window_batch(XR)
    if XL.shape != XR.shape:
        raise ShapeError(f"window shapes differ: {XL.shape} vs {XR.shape}")
    omegas = np.asarray(omegas, dtype=np.float64)
    if omegas.shape != (XL.shape[0], gen.d_h):
        raise ShapeError(f"noise shape {omegas.shape} vs ({XL.shape[0]}, {gen.d_h})")
    p = gen.params
    b, w, _ = XL.shape
    h = np.zeros((b, gen.d_h))
    for t in range(w):
        h = gru_cell_np(p, XL[:, t, :], h, "enc.")
    h = h + omegas
    out = np.empty_like(XR)
    for t in range(w):
        inp = np.zeros((b, gen.d)) if t == 0 else XR[:, t - 1, :]
        h = gru_cell_np(p, inp, h, "dec.")
        out[:, t, :] = h @ p["dec.head_w"].data + p["dec.head_b"].data
    return out


def generate(X_l, X_r, omega, gen: GeneratorParams) -> np.ndarray:
    """Ndarray twin of generate_sequence for a single window pair."""
    X_l = np.asarray(X_l, dtype=np.float64)
    X_r = np.asarray(X_r, dtype=np.float64)
    if X_l.shape != X_r.shape:
        raise ShapeError(f"window shapes differ: {X_l.shape} vs {X_r.shape}")
    omega = np.asarray(omega, dtype=np.float64).reshape(1, -1)
    if omega.shape[1] != gen.d_h:
        raise ShapeError(f"noise dim {omega.shape[1]} vs hidden dim {gen.d_h}")
    p = gen.params
    h = np.zeros((1, gen.d_h))
    for t in range(X_l.shape[0]):
        h = gru_cell_np(p, X_l[t:t + 1], h, "enc.")
    h = h + omega
    shifted = shift_right_one(X_r)
    out = np.empty_like(X_r)
    for t in range(X_r.shape[0]):
        h = gru_cell_np(p, shifted[t:t + 1], h, "dec.")
        out[t] = (h @ p["dec.head_w"].data + p["dec.head_b"].data)[0]
    return out
