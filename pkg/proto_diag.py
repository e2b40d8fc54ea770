import time

import numpy as np

from kcpd.datasets import make_dataset
from kcpd.detection import score_series
from kcpd.evaluation import apply_normalizer, chrono_split, fit_normalizer, roc_auc
from kcpd.training import TrainConfig, TrainerState, fit, kernel_step, generator_step, _windows_at
from kcpd import models
from kcpd.kernels import DeepKernel, RbfKernel


def main(mode="adversarial", seed=0, dataset="jumping-mean", **hp):
    ls = make_dataset(dataset, seed=seed)
    train, val, test = chrono_split(ls.series, ls.labels)
    norm = fit_normalizer(train.series)
    x_tr = apply_normalizer(train.series, norm)
    x_va = apply_normalizer(val.series, norm)
    x_te = apply_normalizer(test.series, norm)

    cfg = TrainConfig(mode=mode, seed=seed, **hp)
    series = x_tr
    t_total, d = series.shape
    w = cfg.window
    rng = np.random.default_rng(cfg.seed)
    phi = models.init_encoder(d, cfg.d_h, rng)
    psi = models.init_decoder(d, cfg.d_h, rng)
    dk = DeepKernel(RbfKernel(1.0), encoder=phi, decoder=psi)
    gen = models.GeneratorParams(d, cfg.d_h, rng, cfg.noise_dist) if mode == "adversarial" else None
    state = TrainerState(dk, gen, cfg)
    noise_scale = cfg.negsample_std * series.std(axis=0, ddof=0)
    positions = np.arange(w, t_total - w + 1)

    # epoch 0: untrained encoder
    ss = score_series(x_va, mode, dk, w=w)
    print(f"epoch  0: val AUC {roc_auc(ss.scores, ss.positions, val.labels, 25):.4f}")

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(positions)
        parts = []
        for i in range(0, len(order), cfg.batch):
            chunk = order[i:i + cfg.batch]
            XL, XR = _windows_at(series, chunk, w)
            if mode == "adversarial":
                Z = models.generate_windows(gen, XL, XR, gen.draw_noise(rng, len(chunk)))
            else:
                Z = XL + rng.standard_normal(XL.shape) * noise_scale
            parts.append(kernel_step(XL, XR, Z, dk, cfg, state))
            if mode == "adversarial" and (i // cfg.batch) % cfg.n_c == cfg.n_c - 1:
                gpos = rng.choice(positions, size=len(chunk), replace=True)
                GXL, GXR = _windows_at(series, gpos, w)
                generator_step(GXL, GXR, dk, gen, cfg, state, gen.draw_noise(rng, len(gpos)))
        pg = np.mean([p["mmd_pg"] for p in parts])
        xx = np.mean([p["mmd_xx"] for p in parts])
        rc = np.mean([p["recon"] for p in parts])
        s2 = np.mean([p["sigma2"] for p in parts])
        ss = score_series(x_va, mode, dk, w=w)
        auc = roc_auc(ss.scores, ss.positions, val.labels, 25)
        st = score_series(x_te, mode, dk, w=w)
        tauc = roc_auc(st.scores, st.positions, test.labels, 25)
        print(f"epoch {epoch:2d}: val AUC {auc:.4f} test AUC {tauc:.4f}  "
              f"pg={pg:+.4f} xx={xx:+.4f} recon={rc:8.3f} sigma2={s2:.4g}",
              flush=True)


if __name__ == "__main__":
    import sys
    mode = sys.argv[1] if len(sys.argv) > 1 else "adversarial"
    hp = {}
    for kv in sys.argv[2:]:
        k, v = kv.split("=")
        hp[k] = float(v) if "." in v or "e" in v else int(v)
    main(mode, **hp)
