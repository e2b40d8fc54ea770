import sys
import time

import numpy as np

from kcpd.datasets import make_dataset
from kcpd.detection import score_series
from kcpd.evaluation import apply_normalizer, chrono_split, fit_normalizer, roc_auc
from kcpd.training import TrainConfig, fit


def run(dataset, seed, mode, tolerance=25, **hp):
    ls = make_dataset(dataset, seed=seed) if isinstance(dataset, str) else dataset
    train, val, test = chrono_split(ls.series, ls.labels)
    norm = fit_normalizer(train.series)
    x_tr = apply_normalizer(train.series, norm)
    x_te = apply_normalizer(test.series, norm)
    cfg = TrainConfig(mode=mode, seed=seed, **hp)
    t0 = time.time()
    dk, gen, log = fit(x_tr, cfg)
    t_fit = time.time() - t0
    ss = score_series(x_te, mode, dk, w=cfg.window)
    auc = roc_auc(ss.scores, ss.positions, test.labels, tolerance)
    last = log[-1] if log else {}
    return auc, t_fit, len(log), last


if __name__ == "__main__":
    dataset = sys.argv[1] if len(sys.argv) > 1 else "jumping-mean"
    seeds = [int(s) for s in (sys.argv[2].split(",") if len(sys.argv) > 2 else [0, 1, 2])]
    modes = sys.argv[3].split(",") if len(sys.argv) > 3 else ["dataspace", "codespace", "adversarial"]
    hp = {}
    for kv in sys.argv[4:]:
        k, v = kv.split("=")
        hp[k] = type(getattr(TrainConfig, k))(v) if hasattr(TrainConfig, k) else float(v)
    for mode in modes:
        aucs = []
        for seed in seeds:
            auc, t_fit, n_ep, last = run(dataset, seed, mode, **hp)
            aucs.append(auc)
            print(f"  {mode:12s} seed {seed}: AUC {auc:.4f}  fit {t_fit:5.1f}s  epochs {n_ep}  "
                  f"pg={last.get('mmd_pg')}")
        print(f"{mode:12s} median AUC {np.median(aucs):.4f}")
