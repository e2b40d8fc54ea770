import json

import numpy as np
import pytest

from kcpd.cli import main, run_experiment
from kcpd.datasets import load_series
from kcpd.detection import load_scores


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def jm_run(tmp_path_factory):
    """One generate -> train -> score -> eval chain, shared across tests."""
    root = tmp_path_factory.mktemp("jm")
    tr, te, run_dir = root / "train", root / "test", root / "run"
    assert run(["generate", "--dataset", "jumping-mean", "--seed", 7,
                "--split", "train", "--out", tr]) == 0
    assert run(["generate", "--dataset", "jumping-mean", "--seed", 7,
                "--split", "test", "--out", te]) == 0
    assert run(["train", "--series", tr / "series.csv", "--mode", "negsample",
                "--max-epochs", 1, "--seed", 7, "--out", run_dir]) == 0
    assert run(["score", "--series", te / "series.csv",
                "--checkpoint", run_dir / "checkpoint.npz", "--out", run_dir]) == 0
    assert run(["eval", "--scores", run_dir / "scores.csv",
                "--labels", te / "series.labels", "--dataset", "jumping-mean",
                "--mode", "negsample", "--seed", 7, "--out", run_dir]) == 0
    return root


def test_generate_writes_series_and_labels(jm_run):
    series = load_series(jm_run / "train" / "series.csv")
    assert series.shape == (3000, 1)
    labels = (jm_run / "train" / "series.labels").read_text().split()
    assert all(l.isdigit() for l in labels)


def test_generate_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(["generate", "--dataset", "gaussian-mixtures", "--seed", 3,
                    "--out", out]) == 0
    assert (a / "series.csv").read_bytes() == (b / "series.csv").read_bytes()
    assert (a / "series.labels").read_bytes() == (b / "series.labels").read_bytes()


def test_generate_blobs_writes_points(tmp_path):
    assert run(["generate", "--dataset", "blobs", "--epsilon", 1, "--n", 40,
                "--out", tmp_path]) == 0
    pts = load_series(tmp_path / "series.csv")
    assert pts.shape == (40, 2)


def test_train_writes_checkpoint_log_manifest(jm_run):
    run_dir = jm_run / "run"
    assert (run_dir / "checkpoint.npz").exists()
    log_lines = (run_dir / "train_log.jsonl").read_text().strip().splitlines()
    assert len(log_lines) == 1  # one epoch -> one record
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 7
    assert manifest["inputs"]  # hashed input series


def test_train_zero_epochs(tmp_path, jm_run):
    out = tmp_path / "run0"
    assert run(["train", "--series", jm_run / "train" / "series.csv",
                "--mode", "codespace", "--max-epochs", 0, "--out", out]) == 0
    assert (out / "train_log.jsonl").read_text() == ""


def test_score_rerun_is_byte_identical(jm_run, tmp_path):
    out2 = tmp_path / "rescore"
    assert run(["score", "--series", jm_run / "test" / "series.csv",
                "--checkpoint", jm_run / "run" / "checkpoint.npz",
                "--out", out2]) == 0
    assert ((jm_run / "run" / "scores.csv").read_bytes()
            == (out2 / "scores.csv").read_bytes())


def test_eval_matches_library_auc(jm_run):
    from kcpd.datasets import load_labels
    from kcpd.evaluation import roc_auc

    ss = load_scores(jm_run / "run" / "scores.csv")
    labels = load_labels(jm_run / "test" / "series.labels")
    expected = roc_auc(ss.scores, ss.positions, labels, 25)
    metrics = dict(line.split("=", 1) for line in
                   (jm_run / "run" / "metrics.txt").read_text().splitlines())
    assert float(metrics["auc"]) == expected
    assert metrics["mode"] == "negsample"


def test_eval_rerun_is_byte_identical(jm_run, tmp_path):
    out2 = tmp_path / "reeval"
    assert run(["eval", "--scores", jm_run / "run" / "scores.csv",
                "--labels", jm_run / "test" / "series.labels",
                "--dataset", "jumping-mean", "--mode", "negsample",
                "--seed", 7, "--out", out2]) == 0
    assert ((jm_run / "run" / "metrics.txt").read_bytes()
            == (out2 / "metrics.txt").read_bytes())


def test_config_file_defaults_and_flag_override(tmp_path, jm_run, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nmax-epochs = 0\nmode = codespace\nseed = 7\n")
    out = tmp_path / "out"
    assert run(["--config", cfg, "train",
                "--series", jm_run / "train" / "series.csv", "--out", out]) == 0
    assert "epochs=0" in capsys.readouterr().out
    # explicit flag beats the file value
    out2 = tmp_path / "out2"
    assert run(["--config", cfg, "train", "--max-epochs", 1,
                "--series", jm_run / "train" / "series.csv", "--out", out2]) == 0
    assert "epochs=1" in capsys.readouterr().out


def test_exit_codes(tmp_path, capsys):
    assert run(["generate", "--dataset", "nope", "--out", tmp_path]) == 2
    assert run(["train", "--series", tmp_path / "missing.csv",
                "--out", tmp_path]) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("not,a,series\n")
    assert run(["train", "--series", bad, "--out", tmp_path]) == 3
    capsys.readouterr()


def test_bad_config_file_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("this line has no equals sign\n")
    assert run(["--config", cfg, "generate", "--dataset", "blobs",
                "--out", tmp_path]) == 2
    capsys.readouterr()


def test_run_experiment_record_shape():
    rec = run_experiment("gaussian-mixtures", "dataspace", seed=0,
                         dataset_kwargs={"T": 1200})
    assert set(rec) >= {"dataset", "mode", "seed", "auc_val", "auc_test",
                        "epochs", "wallclock"}
    assert 0.0 <= rec["auc_test"] <= 1.0
    assert rec["epochs"] == 0
