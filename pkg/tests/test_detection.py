import numpy as np
import pytest

from kcpd import models
from kcpd.detection import (
    ScoreSeries,
    load_scores,
    partition_bandwidth,
    save_scores,
    score_series,
    sliding_pairs,
)
from kcpd.errors import ConfigError, DataError, ParameterError
from kcpd.kernels import DeepKernel, RbfKernel


def step_series(T=200, at=100, level=5.0):
    x = np.zeros(T)
    x[at:] = level
    return x


def test_pair_count_minimal_series():
    # T = 50 fits exactly one pair at t = 25
    pairs = sliding_pairs(np.zeros(50), 25, 25)
    assert len(pairs) == 1
    assert pairs[0].t == 25


def test_pair_count_one_extra_point():
    pairs = sliding_pairs(np.zeros(51), 25, 25)
    assert [p.t for p in pairs] == [25, 26]


def test_pair_stride_spanning_series():
    pairs = sliding_pairs(np.zeros(100), 25, 25, stride=100)
    assert len(pairs) == 1


def test_pair_windows_are_adjacent():
    arr = np.arange(60.0)
    p = sliding_pairs(arr, 10, 20)[0]
    assert p.t == 10
    assert np.array_equal(p.X_l[:, 0], np.arange(0.0, 10.0))
    assert np.array_equal(p.X_r[:, 0], np.arange(10.0, 30.0))


@pytest.mark.parametrize("args", [
    (np.zeros(30), 25, 25, 1),   # too short
    (np.zeros(100), 0, 25, 1),   # bad window
    (np.zeros(100), 25, 25, 0),  # bad stride
])
def test_sliding_pairs_rejects_bad_input(args):
    with pytest.raises(ParameterError):
        sliding_pairs(*args)


def test_constant_series_scores_exactly_zero():
    ss = score_series(np.full(120, 3.7), "dataspace", w=25)
    assert np.array_equal(ss.scores, np.zeros(len(ss)))


def test_constant_series_flat_under_encoder():
    # encoded states of a constant window are a converging trajectory, not
    # identical samples, so the U-statistic sits at a small mode-independent
    # negative constant; what matters for detection is that it is flat
    rng = np.random.default_rng(0)
    dk = DeepKernel(RbfKernel(1.0), encoder=models.init_encoder(1, 4, rng))
    ss = score_series(np.full(120, -1.2), "codespace", dk, w=25)
    assert np.all(ss.scores == ss.scores[0])
    assert ss.scores[0] <= 0.0


def test_step_series_argmax_at_jump():
    ss = score_series(step_series(), "dataspace", w=25)
    t_star = ss.positions[np.argmax(ss.scores)]
    assert 95 <= t_star <= 105


def test_argmax_invariant_under_positive_scaling():
    base = step_series(level=2.0) + np.random.default_rng(1).normal(0, 0.3, 200)
    s1 = score_series(base, "dataspace", w=25)
    for a in (2.0, 3.0, 10.0):
        s2 = score_series(a * base, "dataspace", w=25)
        assert s2.positions[np.argmax(s2.scores)] == s1.positions[np.argmax(s1.scores)]


def test_positions_follow_stride():
    ss = score_series(np.random.default_rng(2).normal(size=130), "dataspace",
                      w=25, stride=5)
    assert np.array_equal(ss.positions, np.arange(25, 106, 5))


def test_scores_deterministic():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(150, 2))
    dk = DeepKernel(RbfKernel(1.0), encoder=models.init_encoder(2, 4, rng))
    a = score_series(x, "adversarial", dk, w=25)
    b = score_series(x, "adversarial", dk, w=25)
    assert a.scores.tobytes() == b.scores.tobytes()


def test_trained_modes_require_encoder():
    x = np.zeros(120)
    for mode in ("codespace", "negsample", "adversarial"):
        with pytest.raises(ConfigError):
            score_series(x, mode, w=25)
    with pytest.raises(ConfigError):
        score_series(x, "nonsense", w=25)


def test_rejects_nonfinite_series():
    x = np.zeros(120)
    x[50] = np.nan
    with pytest.raises(DataError):
        score_series(x, "dataspace", w=25)


def test_rejects_negative_burnin():
    rng = np.random.default_rng(4)
    dk = DeepKernel(RbfKernel(1.0), encoder=models.init_encoder(1, 3, rng))
    with pytest.raises(ParameterError):
        score_series(np.zeros(120), "codespace", dk, w=25, burnin=-1)


def test_burnin_changes_encoded_scores_only():
    rng = np.random.default_rng(5)
    x = rng.normal(size=160) + np.where(np.arange(160) > 80, 2.0, 0.0)
    dk = DeepKernel(RbfKernel(1.0), encoder=models.init_encoder(1, 4, rng))
    warm = score_series(x, "codespace", dk, w=25)          # default burnin = w
    cold = score_series(x, "codespace", dk, w=25, burnin=0)
    assert not np.array_equal(warm.scores, cold.scores)
    d1 = score_series(x, "dataspace", w=25)
    d2 = score_series(x, "dataspace", w=25, burnin=0)
    assert np.array_equal(d1.scores, d2.scores)


def test_partition_bandwidth_positive_and_deterministic():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(300, 2))
    b1 = partition_bandwidth(None, x, 25)
    b2 = partition_bandwidth(None, x, 25)
    assert b1 == b2 > 0
    enc = models.init_encoder(2, 4, rng)
    assert partition_bandwidth(enc, x, 25, burnin=25) > 0


def test_scores_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    ss = ScoreSeries(positions=np.arange(25, 40),
                     scores=rng.normal(size=15) * 1e-3)
    path = tmp_path / "scores.csv"
    save_scores(path, ss)
    back = load_scores(path)
    assert np.array_equal(back.positions, ss.positions)
    assert np.array_equal(back.scores, ss.scores)


def test_load_scores_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,value\n1,0.5\n")
    with pytest.raises(DataError):
        load_scores(path)
