"""Command-line entry point for reproducible experiment runs.

Five subcommands compose into full experiments with no hidden state:

    generate  write a synthetic dataset (series CSV + labels sidecar)
    train     fit a kernel on a series; writes checkpoint + training log
    score     score a series against a checkpoint; writes scores CSV
    eval      AUC of a score file against labels; writes metrics report
    blobs     kernel-selection power table on the blob benchmark

Every command writes ``manifest.json`` into its output directory holding the
fully resolved configuration, the seed, and a content hash per input file, so
a rerun from the same manifest reproduces every output byte for byte.  A
``--config`` file supplies defaults as flat ``key = value`` lines (# comments
allowed); explicit flags win over file values.

Exit codes: 0 success, 2 usage or configuration error, 3 bad input data,
4 numeric failure.
"""

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import models
from .autodiff import ParamStore, load_checkpoint, save_checkpoint
from .datasets import (
    GENERATORS,
    gen_blobs,
    load_labels,
    load_series,
    make_dataset,
    save_labels,
    save_series,
)
from .detection import score_series
from .detection import MODES as SCORE_MODES
from .detection import load_scores, save_scores
from .errors import ConfigError, DataError, KcpdError, MetricError, NumericError, ParameterError
from .evaluation import Normalizer, apply_normalizer, chrono_split, fit_normalizer, roc_auc
from .kernels import DeepKernel, RbfKernel
from .training import TrainConfig, fit, write_log
from .twosample import (
    TestConfig,
    estimate_power,
    max_ratio_chooser,
    median_chooser,
    surrogate_chooser,
)

# bandwidth candidates for the blob experiment's selection rules
BLOB_SIGMA2_GRID = tuple(np.logspace(-2.0, 3.0, 20))

SPLIT_NAMES = ("none", "train", "val", "test")
SPLIT_FRACTIONS = (0.6, 0.2, 0.2)


# -- experiment protocol -------------------------------------------------------


def run_experiment(dataset: str, mode: str, seed: int, tolerance: int = 25,
                   dataset_kwargs: dict | None = None, **overrides) -> dict:
    """Generate, split, normalize, train, score, and evaluate in one call.

    The series is split 60/20/20 in chronological order; the normalizer is
    fitted on the training split only.  Returns a flat record with the
    validation and test AUC.  TrainConfig fields can be overridden by keyword.
    """
    ls = make_dataset(dataset, seed=seed, **(dataset_kwargs or {}))
    train, val, test = chrono_split(ls.series, ls.labels, SPLIT_FRACTIONS)
    norm = fit_normalizer(train.series)
    cfg = TrainConfig(mode=mode, seed=seed, **overrides)

    t0 = time.perf_counter()
    dk, _, log = fit(apply_normalizer(train.series, norm), cfg)

    def auc_of(split):
        ss = score_series(apply_normalizer(split.series, norm), mode, dk,
                          w=cfg.window, burnin=cfg.burnin_steps)
        return roc_auc(ss.scores, ss.positions, split.labels, tolerance)

    return {
        "dataset": dataset,
        "mode": mode,
        "seed": seed,
        "tolerance": tolerance,
        "auc_val": auc_of(val),
        "auc_test": auc_of(test),
        "epochs": len(log),
        "wallclock": time.perf_counter() - t0,
    }


# -- manifest ------------------------------------------------------------------


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, cfg: dict, inputs: list,
                    outputs: list) -> None:
    manifest = {
        "command": command,
        "config": {k: v for k, v in sorted(cfg.items())},
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p.name) for p in outputs],
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- checkpoint <-> model plumbing ---------------------------------------------


def _pack_params(dk: DeepKernel, gen, norm: Normalizer) -> dict:
    arrays = {"norm.lo": norm.lo, "norm.hi": norm.hi}
    if dk.encoder is not None:
        arrays.update({"enc." + k: t.data for k, t in dk.encoder.items()})
    if dk.decoder is not None:
        arrays.update({"dec." + k: t.data for k, t in dk.decoder.items()})
    if gen is not None:
        arrays.update({"gen." + k: t.data for k, t in gen.params.items()})
    return arrays


def _subset(arrays: dict, prefix: str) -> dict:
    return {k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)}


def _unpack_checkpoint(path):
    """Checkpoint -> (mode, TrainConfig, DeepKernel, Normalizer)."""
    arrays, meta = load_checkpoint(path)
    cfg = TrainConfig(**meta["train_config"])
    d = meta["d"]
    norm = Normalizer(lo=arrays["norm.lo"], hi=arrays["norm.hi"])
    if cfg.mode == "dataspace":
        return cfg, DeepKernel(RbfKernel(meta["sigma2"])), norm
    rng = np.random.default_rng(0)
    phi = models.init_encoder(d, cfg.d_h, rng)
    psi = models.init_decoder(d, cfg.d_h, rng)
    phi.load_state_dict(_subset(arrays, "enc."))
    psi.load_state_dict(_subset(arrays, "dec."))
    dk = DeepKernel(RbfKernel(meta["sigma2"]), encoder=phi, decoder=psi)
    return cfg, dk, norm


# -- subcommands ----------------------------------------------------------------


def cmd_generate(cfg: dict) -> int:
    out = _out_dir(cfg)
    seed = cfg["seed"]
    name = cfg["dataset"]
    if name == "blobs":
        pts = gen_blobs(cfg["epsilon"], cfg["n"], seed)
        series_path = out / "series.csv"
        save_series(series_path, pts)
        _write_manifest(out, "generate", cfg, [], [series_path])
        print(f"dataset=blobs n={pts.shape[0]} d={pts.shape[1]} epsilon={cfg['epsilon']}")
        return 0
    kwargs = {"d": cfg["d"]} if name == "highdim" else {}
    ls = make_dataset(name, seed=seed, **kwargs)
    split = cfg["split"]
    if split != "none":
        parts = chrono_split(ls.series, ls.labels, SPLIT_FRACTIONS)
        ls = parts[SPLIT_NAMES.index(split) - 1]
    series_path = out / "series.csv"
    labels_path = out / "series.labels"
    save_series(series_path, ls.series)
    save_labels(labels_path, ls.labels)
    _write_manifest(out, "generate", cfg, [], [series_path, labels_path])
    d = 1 if ls.series.ndim == 1 else ls.series.shape[1]
    print(f"dataset={name} split={split} T={ls.series.shape[0]} "
          f"d={d} labels={len(ls.labels)}")
    return 0


_TRAIN_FIELDS = [f.name for f in dataclasses.fields(TrainConfig)]


def cmd_train(cfg: dict) -> int:
    out = _out_dir(cfg)
    series_path = Path(cfg["series"])
    series = load_series(series_path)
    norm = fit_normalizer(series)
    tc = TrainConfig(**{k: cfg[k] for k in _TRAIN_FIELDS})
    dk, gen, log = fit(apply_normalizer(series, norm), tc)

    ck_path = out / "checkpoint.npz"
    log_path = out / "train_log.jsonl"
    meta = {
        "mode": tc.mode,
        "d": int(series.shape[1]),
        "sigma2": dk.rbf.sigma2,
        "train_config": dataclasses.asdict(tc),
    }
    save_checkpoint(ck_path, _pack_params(dk, gen, norm), meta)
    write_log(log_path, log)
    _write_manifest(out, "train", cfg, [series_path], [ck_path, log_path])
    last = log[-1] if log else {}
    print(f"mode={tc.mode} epochs={len(log)} "
          f"mmd_pg={last.get('mmd_pg')} recon={last.get('recon')}")
    return 0


def cmd_score(cfg: dict) -> int:
    out = _out_dir(cfg)
    series_path = Path(cfg["series"])
    ck_path = Path(cfg["checkpoint"])
    series = load_series(series_path)
    tc, dk, norm = _unpack_checkpoint(ck_path)
    w = cfg["w"] if cfg["w"] is not None else tc.window
    burnin = cfg["burnin"] if cfg["burnin"] is not None else tc.burnin_steps
    ss = score_series(apply_normalizer(series, norm), tc.mode, dk, w=w,
                      stride=cfg["stride"], burnin=burnin)
    scores_path = out / "scores.csv"
    save_scores(scores_path, ss)
    _write_manifest(out, "score", cfg, [series_path, ck_path], [scores_path])
    print(f"mode={tc.mode} pairs={len(ss)} w={w}")
    return 0


def cmd_eval(cfg: dict) -> int:
    out = _out_dir(cfg)
    scores_path = Path(cfg["scores"])
    labels_path = Path(cfg["labels"])
    ss = load_scores(scores_path)
    labels = load_labels(labels_path)
    auc = roc_auc(ss.scores, ss.positions, labels, cfg["tolerance"],
                  two_sided=cfg["two_sided"])
    metrics_path = out / "metrics.txt"
    fields = [
        ("dataset", cfg["dataset"]),
        ("mode", cfg["mode"]),
        ("seed", cfg["seed"]),
        ("tolerance", cfg["tolerance"]),
        ("auc", f"{auc:.17g}"),
    ]
    with open(metrics_path, "w") as fh:
        for key, value in fields:
            fh.write(f"{key}={value}\n")
    _write_manifest(out, "eval", cfg, [scores_path, labels_path], [metrics_path])
    print(f"auc={auc:.6f} tolerance={cfg['tolerance']}")
    return 0


def _blob_sampler(epsilon: float):
    def draw(rng, m):
        return gen_blobs(epsilon, m, rng)
    return draw


def cmd_blobs(cfg: dict) -> int:
    out = _out_dir(cfg)
    p = _blob_sampler(1.0)
    q = _blob_sampler(cfg["eps_q"])
    g = _blob_sampler(cfg["eps_g"])
    grid = BLOB_SIGMA2_GRID
    tcfg = TestConfig(m=cfg["m"], alpha=cfg["alpha"],
                      n_permutations=cfg["permutations"])
    selectors = [
        ("median", median_chooser(p, cfg["m"])),
        ("max-ratio-full", max_ratio_chooser(p, q, cfg["m"], grid)),
        ("max-ratio-sparse", max_ratio_chooser(p, q, cfg["m_sparse"], grid)),
        ("surrogate", surrogate_chooser(p, g, cfg["m_surrogate"], grid)),
    ]
    rows = []
    for name, chooser in selectors:
        rng = np.random.default_rng(cfg["seed"])
        power = estimate_power(p, q, chooser, tcfg, cfg["trials"], rng)
        rows.append((name, power))
        print(f"{name:17s} power={power:.3f}")
    power_path = out / "power.csv"
    with open(power_path, "w") as fh:
        fh.write("selector,power\n")
        for name, power in rows:
            fh.write(f"{name},{power:.17g}\n")
    _write_manifest(out, "blobs", cfg, [], [power_path])
    return 0


# -- argument parsing -----------------------------------------------------------


def _read_config_file(path) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment; keys use flag names."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _coerce(text: str):
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if lowered in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _add_train_flags(sub):
    sub.add_argument("--mode", default="adversarial", choices=SCORE_MODES)
    sub.add_argument("--window", type=int, default=TrainConfig.window)
    sub.add_argument("--d-h", dest="d_h", type=int, default=TrainConfig.d_h)
    sub.add_argument("--lr", type=float, default=TrainConfig.lr)
    sub.add_argument("--lr-gen", dest="lr_gen", type=float, default=None)
    sub.add_argument("--clip-c", dest="clip_c", type=float, default=TrainConfig.clip_c)
    sub.add_argument("--n-c", dest="n_c", type=int, default=TrainConfig.n_c)
    sub.add_argument("--lam", type=float, default=TrainConfig.lam)
    sub.add_argument("--beta", type=float, default=TrainConfig.beta)
    sub.add_argument("--epsilon-stop", dest="epsilon_stop", type=float,
                     default=TrainConfig.epsilon_stop)
    sub.add_argument("--max-epochs", dest="max_epochs", type=int,
                     default=TrainConfig.max_epochs)
    sub.add_argument("--batch", type=int, default=TrainConfig.batch)
    sub.add_argument("--noise-dist", dest="noise_dist", default=TrainConfig.noise_dist,
                     choices=("normal", "uniform"))
    sub.add_argument("--negsample-std", dest="negsample_std", type=float,
                     default=TrainConfig.negsample_std)
    sub.add_argument("--burnin", type=int, default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kcpd",
        description="Kernel change-point detection experiment runner.")
    parser.add_argument("--config", default=None,
                        help="flat key = value file supplying defaults")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    gen = subparsers["generate"] = sub.add_parser(
        "generate", help="write a synthetic dataset")
    gen.add_argument("--dataset", required=True,
                     choices=sorted(GENERATORS) + ["highdim", "blobs"])
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--d", type=int, default=2, help="dimension for highdim")
    gen.add_argument("--epsilon", type=float, default=1.0, help="blob ratio")
    gen.add_argument("--n", type=int, default=500, help="blob sample count")
    gen.add_argument("--split", default="none", choices=SPLIT_NAMES)
    gen.add_argument("--out", required=True)

    train = subparsers["train"] = sub.add_parser(
        "train", help="fit a kernel on a series file")
    train.add_argument("--series", required=True)
    train.add_argument("--seed", type=int, default=0)
    _add_train_flags(train)
    train.add_argument("--out", required=True)

    score = subparsers["score"] = sub.add_parser(
        "score", help="score a series with a checkpoint")
    score.add_argument("--series", required=True)
    score.add_argument("--checkpoint", required=True)
    score.add_argument("--w", type=int, default=None,
                       help="window size (default: from checkpoint)")
    score.add_argument("--stride", type=int, default=1)
    score.add_argument("--burnin", type=int, default=None,
                       help="encoder warm-up steps (default: from checkpoint)")
    score.add_argument("--out", required=True)

    ev = subparsers["eval"] = sub.add_parser(
        "eval", help="AUC of scores against labels")
    ev.add_argument("--scores", required=True)
    ev.add_argument("--labels", required=True)
    ev.add_argument("--tolerance", type=int, default=25)
    ev.add_argument("--two-sided", dest="two_sided", action="store_true")
    ev.add_argument("--dataset", default="unknown")
    ev.add_argument("--mode", default="unknown")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out", required=True)

    blobs = subparsers["blobs"] = sub.add_parser(
        "blobs", help="kernel-selection power table")
    blobs.add_argument("--eps-q", dest="eps_q", type=float, default=6.0)
    blobs.add_argument("--eps-g", dest="eps_g", type=float, default=4.0)
    blobs.add_argument("--m", type=int, default=500)
    blobs.add_argument("--m-sparse", dest="m_sparse", type=int, default=200)
    blobs.add_argument("--m-surrogate", dest="m_surrogate", type=int, default=1000)
    blobs.add_argument("--trials", type=int, default=100)
    blobs.add_argument("--alpha", type=float, default=0.05)
    blobs.add_argument("--permutations", type=int, default=200)
    blobs.add_argument("--seed", type=int, default=0)
    blobs.add_argument("--out", required=True)

    return parser, subparsers


_COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "score": cmd_score,
    "eval": cmd_eval,
    "blobs": cmd_blobs,
}


def parse_args(argv) -> dict:
    parser, subparsers = build_parser()
    # first pass only to locate --config; then inject file values as defaults
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config", default=None)
    known, _ = probe.parse_known_args(argv)
    if known.config is not None:
        overrides = {k: _coerce(v) for k, v in _read_config_file(known.config).items()}
        for command in subparsers.values():
            valid = {a.dest for a in command._actions}
            command.set_defaults(**{k: v for k, v in overrides.items() if k in valid})
    args = parser.parse_args(argv)
    return vars(args)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_args(argv)
        return _COMMANDS[cfg["command"]](cfg)
    except SystemExit as exc:  # argparse usage errors already printed
        return int(exc.code or 0)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, MetricError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except KcpdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
