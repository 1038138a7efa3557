"""Epoch loop, first-layer cardinal-basis precomputation, and per-epoch records.

The training loop is deterministic in its seed: replica initialization,
per-epoch shuffles, and the train-metric subsample all derive from it.
Records are appended per epoch and can be streamed to a CSV that survives
interruption (one flush per epoch).
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cascade import (MultiOutputCascade, forward_batch, init_multi, one_hot_pm1, train_multi)
from .data import Dataset, batches
from .kernel import KernelParams
from .linalg import resolve_dtype
from .metrics import accuracy, roc_auc

CSV_HEADER = ["epoch", "train_metric", "test_metric", "residual", "seconds"]

# rows used for the per-epoch training-split metric; full test split is always used
TRAIN_EVAL_CAP = 50_000


@dataclass
class TrainConfig:
    """Everything a training run needs besides the data itself."""

    widths: list[int]  # last entry = number of outputs (1 = single scalar)
    alpha: float
    epochs: int
    batch_rows: int
    seed: int = 0
    precision: str = "float64"
    init_mode: str = "random"
    precompute_first_layer: bool = False
    shuffle: bool = True
    sigma2: float = 0.0
    kernel: KernelParams = field(default_factory=KernelParams)
    task: str = "classify"  # "classify" (accuracy) | "binary-auc" (ROC AUC)
    eval_chunk_rows: int = 4096

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.task not in ("classify", "binary-auc"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.alpha <= 0 and len(self.widths) > 2:
            raise ValueError("alpha must be > 0 for multi-package cascades")


@dataclass
class EpochRecord:
    epoch: int
    train_metric: float
    test_metric: float
    residual: float
    seconds: float

    def as_row(self) -> list:
        # shortest round-trip float form keeps the CSV lossless
        return [self.epoch, repr(self.train_metric), repr(self.test_metric),
                repr(self.residual), repr(self.seconds)]


def precompute_first_layer_basis(model: MultiOutputCascade, features: np.ndarray,
                                 chunk_rows: int = 4096) -> np.ndarray:
    """Cardinal-basis rows of the first package for every example, by index.

    All replicas share the first package's constellation, so one table serves
    the whole model.  During training, a batch's rows are looked up by example
    index (shuffling is immaterial) and layer 1 reduces to ``basis @ values``:
    the distance and kernel stages are skipped entirely.
    """
    first = model.replicas[0].packages[0]
    if features.shape[1] != first.n_in:
        raise ValueError(f"features have width {features.shape[1]}, "
                         f"first package expects {first.n_in}")
    n = features.shape[0]
    table = np.empty((n, first.k), dtype=model.dtype)
    for lo in range(0, n, chunk_rows):
        hi = min(lo + chunk_rows, n)
        _, state = first.forward(features[lo:hi])
        table[lo:hi] = first.cardinal_basis(state)
    return table


def _targets_for(cfg: TrainConfig, labels: np.ndarray, d: int, dtype) -> np.ndarray:
    if cfg.task == "classify":
        return one_hot_pm1(labels, d, dtype=dtype)
    labels = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    if not np.isin(labels, (0.0, 1.0)).all():
        raise ValueError("binary-auc task expects 0/1 labels")
    return (2.0 * labels - 1.0).astype(dtype)


def _evaluate(cfg: TrainConfig, model: MultiOutputCascade, data: Dataset,
              basis_table: np.ndarray | None = None) -> float:
    scores = model.scores(data.features, first_basis=basis_table,
                          chunk_rows=cfg.eval_chunk_rows)
    if cfg.task == "classify":
        return accuracy(np.argmax(scores, axis=1), data.labels)
    return roc_auc(scores[:, 0], data.labels)


def run_training(cfg: TrainConfig, train: Dataset, test: Dataset,
                 csv_path=None, on_epoch=None) -> tuple[MultiOutputCascade, list[EpochRecord]]:
    """Train a model per the config and record one metric row per epoch.

    With ``epochs == 0`` the returned records hold a single row for the
    initialized model.  ``on_epoch`` (if given) is called with each record
    and the live model as the record is produced.
    """
    d = cfg.widths[-1]
    model = init_multi(cfg.widths, seed=cfg.seed, mode=cfg.init_mode, alpha=cfg.alpha,
                       kernel=cfg.kernel, sigma2=cfg.sigma2, dtype=cfg.precision)
    dtype = resolve_dtype(cfg.precision)

    train_features = train.features.astype(dtype, copy=False)
    basis_table = None
    if cfg.precompute_first_layer:
        basis_table = precompute_first_layer_basis(model, train_features)

    eval_rng = np.random.default_rng(cfg.seed + 10_007)
    if train.n_rows > TRAIN_EVAL_CAP:
        eval_idx = np.sort(eval_rng.choice(train.n_rows, size=TRAIN_EVAL_CAP, replace=False))
    else:
        eval_idx = np.arange(train.n_rows)
    train_eval = Dataset(train.features[eval_idx], train.labels[eval_idx])
    train_eval_basis = None if basis_table is None else basis_table[eval_idx]

    writer = _CsvSink(csv_path) if csv_path else None
    records: list[EpochRecord] = []

    def emit(record: EpochRecord):
        records.append(record)
        if writer:
            writer.write(record)
        if on_epoch:
            on_epoch(record, model)

    if cfg.epochs == 0:
        t0 = time.perf_counter()
        emit(EpochRecord(0, _evaluate(cfg, model, train_eval, train_eval_basis),
                         _evaluate(cfg, model, test), float("nan"),
                         time.perf_counter() - t0))
        if writer:
            writer.close()
        return model, records

    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        residuals = []
        for batch in batches(train, cfg.batch_rows, seed=cfg.seed + epoch, shuffle=cfg.shuffle):
            x0 = batch.features.astype(dtype, copy=False)
            targets = _targets_for(cfg, batch.labels, d, dtype)
            fb = None if basis_table is None else basis_table[batch.indices]
            outs = []
            workspaces = []
            for c in model.replicas:
                out, ws = forward_batch(c, x0, first_basis=fb)
                outs.append(out)
                workspaces.append(ws)
            reports = train_multi(model, workspaces, targets, measure_after=False)
            residuals.append(np.mean([rep.residual_before_rms for rep in reports]))
        train_metric = _evaluate(cfg, model, train_eval, train_eval_basis)
        test_metric = _evaluate(cfg, model, test)
        emit(EpochRecord(epoch, train_metric, test_metric,
                         float(np.mean(residuals)), time.perf_counter() - t0))
    if writer:
        writer.close()
    return model, records


class _CsvSink:
    """Appends one row per epoch and flushes immediately, so partial runs keep logs."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(CSV_HEADER)
        self._fh.flush()

    def write(self, record: EpochRecord):
        self._writer.writerow(record.as_row())
        self._fh.flush()

    def close(self):
        self._fh.close()
