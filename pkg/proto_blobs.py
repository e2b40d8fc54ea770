import time

import numpy as np

from kcpd.datasets import gen_blobs
from kcpd.twosample import (
    TestConfig,
    estimate_power,
    max_ratio_chooser,
    median_chooser,
    surrogate_chooser,
)


def sampler(epsilon):
    def draw(rng, m):
        return gen_blobs(epsilon, m, int(rng.integers(0, 2**31 - 1)))
    return draw


def main():
    p = sampler(1.0)
    q = sampler(6.0)
    g = sampler(4.0)
    grid = np.logspace(-2, 3, 20)
    cfg = TestConfig(m=500, alpha=0.05, n_permutations=200)
    trials = 50

    choosers = {
        "ratio-sparse200": max_ratio_chooser(p, q, 200, grid),
        "surr-bound-1000": surrogate_chooser(p, g, 1000, grid, criterion="bound"),
        "surr-bound-2000": surrogate_chooser(p, g, 2000, grid, criterion="bound"),
        "surr-ratio-1000": surrogate_chooser(p, g, 1000, grid, criterion="ratio"),
    }
    for name, chooser in choosers.items():
        t0 = time.time()
        power = estimate_power(p, q, chooser, cfg, trials, np.random.default_rng(7))
        print(f"{name:18s} power={power:.3f}  ({time.time() - t0:.1f}s)")


if __name__ == "__main__":
    main()
