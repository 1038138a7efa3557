import struct

import numpy as np
import pytest

from polycascade.cli import EXIT_CONFIG, EXIT_OK, main
from polycascade.config import ConfigError, load_run_config


def shells_config(tmp_path, **overrides):
    base = {
        "format": "synthetic-shells", "train_rows": 600, "test_rows": 200,
        "dim": 6, "data_seed": 1, "normalize": "false",
    }
    model = {"widths": "6,20,1", "alpha": "20", "init": "identity-fragments"}
    train = {"epochs": "1", "batch_rows": "200", "seed": "2", "task": "binary-auc"}
    out = {"dir": str(tmp_path / "run")}
    for section in (base, model, train, out):
        section.update({k: str(v) for k, v in overrides.items() if k in section})
    text = "[data]\n" + "\n".join(f"{k} = {v}" for k, v in base.items())
    text += "\n[model]\n" + "\n".join(f"{k} = {v}" for k, v in model.items())
    text += "\n[train]\n" + "\n".join(f"{k} = {v}" for k, v in train.items())
    text += "\n[output]\n" + "\n".join(f"{k} = {v}" for k, v in out.items())
    path = tmp_path / "run.ini"
    path.write_text(text + "\n")
    return path


def test_dry_run_prints_architecture(tmp_path, capsys):
    cfg = shells_config(tmp_path)
    assert main(["train", str(cfg), "--dry-run"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "6-20-1" in out
    assert "constellation points 13" in out  # 2*6 + 1
    assert "trainable parameters" in out


def test_dry_run_tolerates_unstaged_data(tmp_path, capsys):
    path = tmp_path / "future.ini"
    path.write_text(
        "[data]\nformat = idx\ntrain_images = /not/yet/img\ntrain_labels = /not/yet/lbl\n"
        "test_images = /not/yet/ti\ntest_labels = /not/yet/tl\n"
        "[model]\nwidths = 4,1\n[train]\nepochs = 1\n[output]\ndir = out\n")
    assert main(["train", str(path), "--dry-run"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "not staged yet" in out and "trainable parameters" in out


def test_unknown_key_rejected(tmp_path, capsys):
    path = shells_config(tmp_path)
    path.write_text(path.read_text() + "typo_key = 1\n")
    assert main(["train", str(path), "--dry-run"]) == EXIT_CONFIG
    assert "typo_key" in capsys.readouterr().err


def test_unknown_section_rejected(tmp_path):
    path = shells_config(tmp_path)
    path.write_text(path.read_text() + "[mystery]\nx = 1\n")
    with pytest.raises(ConfigError, match="mystery"):
        load_run_config(path)


def test_missing_dataset_path_exit_2(tmp_path, capsys):
    path = tmp_path / "missing.ini"
    path.write_text(
        "[data]\nformat = idx\ntrain_images = /nope/img\ntrain_labels = /nope/lbl\n"
        "test_images = /nope/ti\ntest_labels = /nope/tl\n"
        "[model]\nwidths = 4,1\n[train]\nepochs = 1\n[output]\ndir = out\n")
    assert main(["train", str(path)]) == EXIT_CONFIG
    assert "/nope/img" in capsys.readouterr().err


def test_missing_config_file_exit_2(tmp_path, capsys):
    assert main(["train", str(tmp_path / "absent.ini")]) == EXIT_CONFIG
    assert "not found" in capsys.readouterr().err


def test_train_writes_artifacts(tmp_path, capsys):
    cfg = shells_config(tmp_path)
    assert main(["train", str(cfg)]) == EXIT_OK
    run_dir = tmp_path / "run"
    metrics = (run_dir / "metrics.csv").read_text().strip().splitlines()
    assert metrics[0] == "epoch,train_metric,test_metric,residual,seconds"
    assert len(metrics) == 2  # one epoch
    assert (run_dir / "model.phc1").exists()
    assert (run_dir / "effective.ini").exists()
    assert "widths = 6,20,1" in (run_dir / "effective.ini").read_text()


def test_eval_roundtrip(tmp_path, capsys):
    cfg = shells_config(tmp_path)
    assert main(["train", str(cfg)]) == EXIT_OK
    capsys.readouterr()
    # dump the same synthetic test split as a delimited file
    from polycascade.synthetic import make_shell_task
    _, test = make_shell_task(n_train=600, n_test=200, dim=6, seed=1)
    data_path = tmp_path / "test.csv"
    np.savetxt(data_path, np.hstack([test.labels.reshape(-1, 1), test.features]),
               delimiter=",")
    snapshot = tmp_path / "run" / "model.phc1"
    assert main(["eval", str(snapshot), str(data_path), "--label-column", "0"]) == EXIT_OK
    assert "roc_auc" in capsys.readouterr().out


def test_eval_bad_snapshot_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.phc1"
    bad.write_bytes(b"JUNKJUNK")
    assert main(["eval", str(bad), str(bad)]) == EXIT_CONFIG


def test_verify_command_exit_0(capsys):
    assert main(["verify", "--seed", "1"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "7/7 invariants passed" in out


def test_bench_command_small(tmp_path, capsys):
    out_csv = tmp_path / "bench.csv"
    code = main(["bench", "--max-n", "16", "--batch-rows", "4", "--repeats", "1",
                 "--out", str(out_csv)])
    assert code == EXIT_OK
    assert out_csv.exists()
    printed = capsys.readouterr().out
    assert "crossover width for backward" in printed


def test_idx_config_end_to_end(tmp_path):
    # tiny synthetic IDX pair exercised through the full CLI train path
    rng = np.random.default_rng(0)
    def write_pair(stem, n):
        images = rng.integers(0, 256, (n, 2, 3), dtype=np.uint8)
        labels = rng.integers(0, 3, n, dtype=np.uint8)
        ip = tmp_path / f"{stem}-images"
        lp = tmp_path / f"{stem}-labels"
        ip.write_bytes(struct.pack(">IIII", 0x803, n, 2, 3) + images.tobytes())
        lp.write_bytes(struct.pack(">II", 0x801, n) + labels.tobytes())
        return ip, lp

    tri, trl = write_pair("train", 120)
    tei, tel = write_pair("test", 40)
    cfg = tmp_path / "idx.ini"
    cfg.write_text(f"""
[data]
format = idx
train_images = {tri}
train_labels = {trl}
test_images = {tei}
test_labels = {tel}
normalize = true

[model]
widths = 6,8,3
alpha = 10

[train]
epochs = 1
batch_rows = 60
seed = 0

[output]
dir = {tmp_path / "idxrun"}
""")
    assert main(["train", str(cfg)]) == EXIT_OK
    assert (tmp_path / "idxrun" / "model.phc1").exists()
