"""Alternating min-max training of the deep kernel against a surrogate generator.

One kernel step ascends

    M-hat(enc X_r, enc Z) - lam * M-hat(enc X_l, enc X_r)
        - beta * mean reconstruction error over {X_r, Z}

in the encoder (and decoder, via the reconstruction term), then clips the
encoder weights.  One generator step descends the first term in the generator
parameters.  ``fit`` alternates n_c kernel steps per generator step over
uniformly sampled consecutive window pairs and stops early once the
epoch-mean surrogate MMD falls to epsilon_stop.

Ablation modes: "adversarial" runs the full loop; "negsample" replaces
generated Z with noise-injected copies of X_l; "codespace" trains the
encoder/decoder as a plain autoencoder; "dataspace" skips training entirely
and yields an identity encoder with a median-heuristic bandwidth.
"""

import json
import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import models
from .autodiff import Adam, ParamStore, RMSProp, Tensor, clip_parameters
from .detection import partition_bandwidth
from .errors import ConfigError, NumericError, ParameterError
from .kernels import DeepKernel, RbfKernel, median_heuristic
from .mmd import mmd2_pairs, mmd2_unbiased_t

MODES = ("dataspace", "codespace", "negsample", "adversarial")
BANDWIDTH_MAX_ROWS = 2000


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "adversarial"
    window: int = 25
    d_h: int = 10
    lr: float = 3e-4
    lr_gen: float | None = None
    clip_c: float = 0.1
    n_c: int = 5
    lam: float = 1.0
    beta: float = 1.0
    epsilon_stop: float = 1e-3
    max_epochs: int = 10
    batch: int = 64
    seed: int = 0
    noise_dist: str = "normal"
    negsample_std: float = 0.1
    burnin: int | None = None  # None -> window

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        checks = [
            (self.window >= 2, "window must be >= 2"),
            (self.d_h >= 1, "d_h must be >= 1"),
            (self.lr > 0, "lr must be > 0"),
            (self.lr_gen is None or self.lr_gen > 0, "lr_gen must be > 0"),
            (self.clip_c > 0, "clip_c must be > 0"),
            (self.n_c >= 1, "n_c must be >= 1"),
            (self.lam >= 0, "lam must be >= 0"),
            (self.beta >= 0, "beta must be >= 0"),
            (self.epsilon_stop > 0, "epsilon_stop must be > 0"),
            (self.max_epochs >= 0, "max_epochs must be >= 0"),
            (self.batch >= 1, "batch must be >= 1"),
            (self.negsample_std > 0, "negsample_std must be > 0"),
            (self.burnin is None or self.burnin >= 0, "burnin must be >= 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ParameterError(msg)

    @property
    def burnin_steps(self) -> int:
        return self.window if self.burnin is None else self.burnin


# -- batch plumbing -----------------------------------------------------------


def _as_series(series) -> np.ndarray:
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ParameterError("training series must be a nonempty (T, d) array")
    return arr


def _windows_at(series: np.ndarray, positions: np.ndarray, w: int):
    """Positions t -> left windows [t-w, t) and right windows [t, t+w)."""
    XL = np.stack([series[t - w:t] for t in positions])
    XR = np.stack([series[t:t + w] for t in positions])
    return XL, XR


def _encode_states(phi: ParamStore, X: np.ndarray, burnin: int = 0) -> list:
    """(B, w, d) constants -> list of w recorded (B, d_h) state Tensors."""
    xs = [Tensor(np.ascontiguousarray(X[:, t, :])) for t in range(X.shape[1])]
    return models.encode_sequence(phi, xs, burnin=burnin)


def _stack_states(states: list) -> np.ndarray:
    """List of w (B, d_h) states -> (B, w, d_h) ndarray."""
    return np.stack([s.data for s in states], axis=1)


def _batch_bandwidth(*encoded) -> float:
    """Median-heuristic bandwidth over pooled encoded rows, subsampled
    deterministically so the pdist stays small."""
    rows = np.concatenate([h.reshape(-1, h.shape[-1]) for h in encoded])
    if rows.shape[0] > BANDWIDTH_MAX_ROWS:
        step = -(-rows.shape[0] // BANDWIDTH_MAX_ROWS)
        rows = rows[::step]
    return median_heuristic(rows)


def _per_pair_mmd_terms(states_x: list, states_y: list, sigma2: float) -> ad.Tensor:
    """Mean over pairs of the per-pair unbiased MMD^2, as a recorded scalar.

    States are time-major (B, d_h) Tensors; pair b's encoding is row b of
    every state, gathered into a (w, d_h) sample matrix.
    """
    b = states_x[0].shape[0]
    hx_all = ad.concat_rows(states_x)
    hy_all = ad.concat_rows(states_y)
    w = len(states_x)
    terms = []
    for i in range(b):
        idx = i + b * np.arange(w)
        hx = ad.gather_rows(hx_all, idx)
        hy = ad.gather_rows(hy_all, idx)
        terms.append(mmd2_unbiased_t(hx, hy, sigma2))
    return ad.tmean(ad.concat_rows(terms))


def _recon_sum(psi: ParamStore, states: list, X: np.ndarray) -> ad.Tensor:
    """Summed squared reconstruction error of one window batch."""
    decoded = models.decode_sequence(psi, states)
    total = None
    for t, out in enumerate(decoded):
        res = Tensor(np.ascontiguousarray(X[:, t, :])) - out
        sq = ad.sq_frobenius(res)
        total = sq if total is None else total + sq
    return total


# -- objectives ---------------------------------------------------------------


def kernel_objective(phi: ParamStore, psi: ParamStore, XL, XR, Z,
                     lam: float, beta: float, sigma2=None, burnin: int = 0):
    """Recorded three-term ascent objective; returns (objective, term values).

    Each MMD term gets the median-heuristic bandwidth of its own pooled
    two-sample batch, held constant within the step; without pooling the
    exponent saturates once the encoder separates data from surrogates and
    the surrogate term stops producing gradient.  An explicit sigma2
    overrides both (used by gradient checks).  Terms with zero coefficient
    are left out of the graph; their logged value is recomputed on the
    detached encodings instead.
    """
    b = XL.shape[0]
    states_l = _encode_states(phi, XL, burnin)
    states_r = _encode_states(phi, XR, burnin)
    states_z = _encode_states(phi, Z, burnin)
    s2_pg = sigma2 if sigma2 is not None else _batch_bandwidth(
        _stack_states(states_r), _stack_states(states_z))
    s2_xx = sigma2 if sigma2 is not None else _batch_bandwidth(
        _stack_states(states_l), _stack_states(states_r))

    pg = _per_pair_mmd_terms(states_r, states_z, s2_pg)
    obj = pg
    if lam > 0:
        xx = _per_pair_mmd_terms(states_l, states_r, s2_xx)
        obj = obj - lam * xx
        xx_val = xx.item()
    else:
        xx_val = float(mmd2_pairs(_stack_states(states_l),
                                  _stack_states(states_r), s2_xx).mean())
    if beta > 0:
        recon = (_recon_sum(psi, states_r, XR)
                 + _recon_sum(psi, states_z, Z)) * (1.0 / (2 * b))
        obj = obj - beta * recon
        recon_val = recon.item()
    else:
        recon_val = None
    parts = {"mmd_pg": pg.item(), "mmd_xx": xx_val, "recon": recon_val,
             "sigma2": s2_pg}
    return obj, parts


def generator_objective(phi: ParamStore, gen: models.GeneratorParams,
                        XL, XR, omegas, sigma2=None, burnin: int = 0):
    """Recorded surrogate MMD between encoded X_r and encoded generated Z."""
    w = XL.shape[1]
    xl = [Tensor(np.ascontiguousarray(XL[:, t, :])) for t in range(w)]
    xr = [Tensor(np.ascontiguousarray(XR[:, t, :])) for t in range(w)]
    zs = models.generate_sequence(gen, xl, xr, Tensor(omegas))
    states_z = models.encode_sequence(phi, zs, burnin=burnin)
    states_r = _encode_states(phi, XR, burnin)
    if sigma2 is None:
        sigma2 = _batch_bandwidth(_stack_states(states_r),
                                  _stack_states(states_z))
    return _per_pair_mmd_terms(states_r, states_z, sigma2)


def _require_finite(obj: ad.Tensor) -> None:
    if not np.isfinite(obj.data).all():
        raise NumericError("non-finite training objective; step aborted")


# -- steps --------------------------------------------------------------------


class TrainerState:
    """Optimizer state carried across steps of one run."""

    def __init__(self, dk: DeepKernel, gen, cfg: TrainConfig):
        ascent = cfg.mode != "codespace"
        self.opt_enc = RMSProp(dk.encoder, cfg.lr, ascent=ascent)
        self.opt_dec = RMSProp(dk.decoder, cfg.lr, ascent=ascent)
        lr_gen = cfg.lr if cfg.lr_gen is None else cfg.lr_gen
        self.opt_gen = Adam(gen.params, lr_gen) if gen is not None else None


def kernel_step(XL, XR, Z, dk: DeepKernel, cfg: TrainConfig,
                state: TrainerState) -> dict:
    """One RMSProp ascent step on encoder and decoder, then clip the encoder."""
    obj, parts = kernel_objective(dk.encoder, dk.decoder, XL, XR, Z,
                                  cfg.lam, cfg.beta, burnin=cfg.burnin_steps)
    _require_finite(obj)
    dk.encoder.zero_grad()
    dk.decoder.zero_grad()
    obj.backward()
    state.opt_enc.step()
    if cfg.beta > 0:
        state.opt_dec.step()
    clip_parameters(dk.encoder, cfg.clip_c)
    return parts


def generator_step(XL, XR, dk: DeepKernel, gen: models.GeneratorParams,
                   cfg: TrainConfig, state: TrainerState, omegas) -> float:
    """One Adam descent step on the generator parameters."""
    obj = generator_objective(dk.encoder, gen, XL, XR, omegas,
                              burnin=cfg.burnin_steps)
    _require_finite(obj)
    gen.params.zero_grad()
    dk.encoder.zero_grad()
    obj.backward()
    state.opt_gen.step()
    dk.encoder.zero_grad()
    return obj.item()


def codespace_step(XL, XR, dk: DeepKernel, cfg: TrainConfig,
                   state: TrainerState) -> dict:
    """One RMSProp descent step on the plain autoencoder loss, both windows."""
    b = XL.shape[0]
    states_l = _encode_states(dk.encoder, XL, cfg.burnin_steps)
    states_r = _encode_states(dk.encoder, XR, cfg.burnin_steps)
    loss = (_recon_sum(dk.decoder, states_l, XL)
            + _recon_sum(dk.decoder, states_r, XR)) * (1.0 / (2 * b))
    _require_finite(loss)
    dk.encoder.zero_grad()
    dk.decoder.zero_grad()
    loss.backward()
    state.opt_enc.step()
    state.opt_dec.step()
    return {"mmd_pg": None, "mmd_xx": None, "recon": loss.item()}


# -- full runs ----------------------------------------------------------------


def _epoch_mean(values: list):
    vals = [v for v in values if v is not None]
    if not vals or len(vals) != len(values):
        return None
    return float(np.mean(vals))


def fit(train_series, cfg: TrainConfig):
    """Run the configured training mode; returns (DeepKernel, generator, log).

    The log holds one record per completed epoch with the epoch means of the
    objective terms and the cumulative wallclock.  Generator is None for every
    mode but "adversarial".
    """
    series = _as_series(train_series)
    t_total, d = series.shape
    w = cfg.window
    if t_total < 2 * w:
        raise ParameterError(f"series length {t_total} shorter than one window pair {2 * w}")
    rng = np.random.default_rng(cfg.seed)

    if cfg.mode == "dataspace":
        return DeepKernel(RbfKernel(partition_bandwidth(None, series, w))), None, []

    phi = models.init_encoder(d, cfg.d_h, rng)
    psi = models.init_decoder(d, cfg.d_h, rng)
    dk = DeepKernel(RbfKernel(1.0), encoder=phi, decoder=psi)
    gen = models.GeneratorParams(d, cfg.d_h, rng, cfg.noise_dist) if cfg.mode == "adversarial" else None
    state = TrainerState(dk, gen, cfg)
    noise_scale = cfg.negsample_std * series.std(axis=0, ddof=0)

    positions = np.arange(w, t_total - w + 1)
    log = []
    t0 = time.perf_counter()
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(positions)
        step_parts = []
        for i in range(0, len(order), cfg.batch):
            chunk = order[i:i + cfg.batch]
            XL, XR = _windows_at(series, chunk, w)
            if cfg.mode == "codespace":
                step_parts.append(codespace_step(XL, XR, dk, cfg, state))
                continue
            if cfg.mode == "adversarial":
                Z = models.generate_windows(gen, XL, XR, gen.draw_noise(rng, len(chunk)))
            else:
                Z = XL + rng.standard_normal(XL.shape) * noise_scale
            step_parts.append(kernel_step(XL, XR, Z, dk, cfg, state))
            if cfg.mode == "adversarial" and (i // cfg.batch) % cfg.n_c == cfg.n_c - 1:
                gpos = rng.choice(positions, size=len(chunk), replace=True)
                GXL, GXR = _windows_at(series, gpos, w)
                generator_step(GXL, GXR, dk, gen, cfg, state,
                               gen.draw_noise(rng, len(gpos)))
        record = {
            "epoch": epoch,
            "mmd_pg": _epoch_mean([p["mmd_pg"] for p in step_parts]),
            "mmd_xx": _epoch_mean([p["mmd_xx"] for p in step_parts]),
            "recon": _epoch_mean([p["recon"] for p in step_parts]),
            "wallclock": time.perf_counter() - t0,
        }
        log.append(record)
        # The stop rule watches the surrogate MMD, which only tracks progress
        # when a generator is being trained toward the data; the negsample
        # surrogate sits near the data from the start and would stop at once.
        if cfg.mode == "adversarial" and record["mmd_pg"] is not None \
                and record["mmd_pg"] <= cfg.epsilon_stop:
            break

    dk.rbf = RbfKernel(partition_bandwidth(phi, series, w, burnin=cfg.burnin_steps))
    return dk, gen, log


def write_log(path, log: list) -> None:
    with open(path, "w") as fh:
        for record in log:
            fh.write(json.dumps(record) + "\n")


def read_log(path) -> list:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
