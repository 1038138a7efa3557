"""Dataset ingestion, normalization, and batching.

Supports the two container formats the experiments use: IDX binaries (the
MNIST pair of image/label files) and delimited numeric text with one label
column.  Normalization is fitted on training rows only and maps each feature
column affinely into [-1, 1]; selected columns can be log- or log1p-
transformed first.  A fitted spec round-trips through a JSON dict so stored
models can reproduce their training preprocessing exactly.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DataFormatError(ValueError):
    """A dataset file violates its format contract."""


@dataclass
class Dataset:
    """Features plus per-row labels, with an optional train/test row split."""

    features: np.ndarray  # N x n0
    labels: np.ndarray  # length N; integer classes or real targets
    n_train: int | None = None  # first n_train rows are the training split

    def __post_init__(self):
        if self.features.ndim != 2:
            raise DataFormatError(f"features must be 2-D, got ndim={self.features.ndim}")
        if len(self.labels) != self.features.shape[0]:
            raise DataFormatError(
                f"{len(self.labels)} labels for {self.features.shape[0]} rows")
        if self.n_train is not None and not (0 < self.n_train <= self.features.shape[0]):
            raise DataFormatError(f"n_train={self.n_train} outside (0, {self.features.shape[0]}]")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def train(self) -> "Dataset":
        if self.n_train is None:
            return self
        return Dataset(self.features[:self.n_train], self.labels[:self.n_train])

    @property
    def test(self) -> "Dataset":
        if self.n_train is None:
            raise ValueError("dataset has no split metadata")
        return Dataset(self.features[self.n_train:], self.labels[self.n_train:])


def _read_exact(f, n: int, what: str, path) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise DataFormatError(
            f"{path}: truncated while reading {what}: wanted {n} bytes, got {len(buf)}")
    return buf


def load_idx(images_path, labels_path) -> Dataset:
    """Load an IDX image/label file pair into rows of raw byte values.

    Image pixels arrive as floats in [0, 255]; apply a transform spec to map
    them into the cascade's working range.
    """
    images_path, labels_path = Path(images_path), Path(labels_path)
    with open(images_path, "rb") as f:
        magic, count, rows, cols = struct.unpack(">IIII", _read_exact(f, 16, "header", images_path))
        if magic != IDX_IMAGES_MAGIC:
            raise DataFormatError(
                f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
        payload = _read_exact(f, count * rows * cols, f"{count} images of {rows}x{cols}",
                              images_path)
        if f.read(1):
            raise DataFormatError(f"{images_path}: trailing bytes after image payload")
    features = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows * cols).astype(np.float64)

    with open(labels_path, "rb") as f:
        magic, label_count = struct.unpack(">II", _read_exact(f, 8, "header", labels_path))
        if magic != IDX_LABELS_MAGIC:
            raise DataFormatError(
                f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")
        if label_count != count:
            raise DataFormatError(
                f"{labels_path}: {label_count} labels for {count} images in {images_path}")
        labels = np.frombuffer(_read_exact(f, label_count, "labels", labels_path), dtype=np.uint8)
        if f.read(1):
            raise DataFormatError(f"{labels_path}: trailing bytes after label payload")
    return Dataset(features, labels.astype(np.int64))


def load_delimited(path, label_column: int = 0, delimiter: str = ",",
                   max_rows: int | None = None) -> Dataset:
    """Parse a rectangular numeric table, one label column, rest features.

    Streams the file line by line; memory is proportional to the parsed
    output.  Errors carry 1-based row and column coordinates.
    """
    path = Path(path)
    features_chunks: list[np.ndarray] = []
    labels_chunks: list[np.ndarray] = []
    buf_feats: list[list[float]] = []
    buf_labels: list[float] = []
    width = None
    with open(path, "r", encoding="utf-8") as f:
        for row_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(delimiter)
            if width is None:
                width = len(cells)
                if label_column >= width or label_column < -width:
                    raise DataFormatError(
                        f"{path}: label column {label_column} out of range for {width} columns")
            elif len(cells) != width:
                raise DataFormatError(
                    f"{path}: row {row_no} has {len(cells)} cells, expected {width}")
            try:
                row = [float(c) for c in cells]
            except ValueError:
                for col_no, c in enumerate(cells, start=1):
                    try:
                        float(c)
                    except ValueError:
                        raise DataFormatError(
                            f"{path}: non-numeric cell at row {row_no}, column {col_no}: {c!r}"
                        ) from None
                raise
            buf_labels.append(row.pop(label_column if label_column >= 0 else label_column + width))
            buf_feats.append(row)
            if len(buf_feats) >= 65536:
                features_chunks.append(np.asarray(buf_feats, dtype=np.float64))
                labels_chunks.append(np.asarray(buf_labels, dtype=np.float64))
                buf_feats, buf_labels = [], []
            if max_rows is not None and row_no >= max_rows:
                break
    if buf_feats:
        features_chunks.append(np.asarray(buf_feats, dtype=np.float64))
        labels_chunks.append(np.asarray(buf_labels, dtype=np.float64))
    if not features_chunks:
        raise DataFormatError(f"{path}: empty dataset")
    return Dataset(np.vstack(features_chunks), np.concatenate(labels_chunks))


@dataclass(frozen=True)
class TransformSpec:
    """Per-column preprocessing: optional log transforms, then min-max to [-1, 1].

    ``log_columns`` and ``log1p_columns`` are 0-based feature indices.  The
    bounds fields are filled by fitting; a spec with bounds applies without
    refitting, which is how inference reuses training normalization.
    """

    log_columns: tuple[int, ...] = ()
    log1p_columns: tuple[int, ...] = ()
    clamp: bool = False
    col_min: tuple[float, ...] | None = None
    col_max: tuple[float, ...] | None = None

    @property
    def fitted(self) -> bool:
        return self.col_min is not None

    def to_dict(self) -> dict:
        return {
            "log_columns": list(self.log_columns),
            "log1p_columns": list(self.log1p_columns),
            "clamp": self.clamp,
            "col_min": None if self.col_min is None else list(self.col_min),
            "col_max": None if self.col_max is None else list(self.col_max),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TransformSpec":
        return cls(
            log_columns=tuple(d.get("log_columns", ())),
            log1p_columns=tuple(d.get("log1p_columns", ())),
            clamp=bool(d.get("clamp", False)),
            col_min=None if d.get("col_min") is None else tuple(d["col_min"]),
            col_max=None if d.get("col_max") is None else tuple(d["col_max"]),
        )


def _apply_logs(features: np.ndarray, spec: TransformSpec, path_hint: str) -> np.ndarray:
    out = features.copy()
    for col in spec.log_columns:
        column = out[:, col]
        if np.any(column <= 0):
            bad = int(np.argmax(column <= 0))
            raise DataFormatError(
                f"{path_hint}: log column {col} has non-positive value {column[bad]} at row {bad}")
        out[:, col] = np.log(column)
    for col in spec.log1p_columns:
        column = out[:, col]
        if np.any(column <= -1):
            bad = int(np.argmax(column <= -1))
            raise DataFormatError(
                f"{path_hint}: log1p column {col} has value {column[bad]} <= -1 at row {bad}")
        out[:, col] = np.log1p(column)
    return out


def fit_apply_transforms(dataset: Dataset, spec: TransformSpec,
                         ) -> tuple[Dataset, TransformSpec]:
    """Fit bounds on the training split (unless already fitted) and apply.

    Log transforms run first, then each column maps affinely so the training
    min/max land on -1/+1.  Zero-range columns map to 0 everywhere.  Rows
    outside the training bounds (test split) pass through unclamped unless
    the spec asks for clamping.
    """
    transformed = _apply_logs(dataset.features, spec, "features")
    ncols = transformed.shape[1]
    bad_cols = [c for c in (*spec.log_columns, *spec.log1p_columns) if not 0 <= c < ncols]
    if bad_cols:
        raise DataFormatError(f"transform columns {bad_cols} out of range for {ncols} features")

    if spec.fitted:
        lo = np.asarray(spec.col_min, dtype=np.float64)
        hi = np.asarray(spec.col_max, dtype=np.float64)
        if lo.size != ncols:
            raise DataFormatError(f"fitted spec has {lo.size} columns, dataset has {ncols}")
        fitted = spec
    else:
        train_rows = transformed if dataset.n_train is None else transformed[:dataset.n_train]
        lo = train_rows.min(axis=0)
        hi = train_rows.max(axis=0)
        fitted = replace(spec, col_min=tuple(lo.tolist()), col_max=tuple(hi.tolist()))

    span = hi - lo
    safe_span = np.where(span > 0, span, 1.0)
    scaled = 2.0 * (transformed - lo) / safe_span - 1.0
    scaled[:, span == 0] = 0.0
    if spec.clamp:
        np.clip(scaled, -1.0, 1.0, out=scaled)
    return Dataset(scaled, dataset.labels, n_train=dataset.n_train), fitted


def invert_minmax(features: np.ndarray, spec: TransformSpec) -> np.ndarray:
    """Undo the affine map (log transforms are not inverted); zero-range columns stay 0."""
    if not spec.fitted:
        raise ValueError("spec is not fitted")
    lo = np.asarray(spec.col_min)
    hi = np.asarray(spec.col_max)
    span = hi - lo
    out = (features + 1.0) / 2.0 * np.where(span > 0, span, 1.0) + lo
    out[:, span == 0] = lo[span == 0]
    return out


@dataclass(frozen=True)
class Batch:
    features: np.ndarray
    labels: np.ndarray
    indices: np.ndarray  # dataset row numbers, keys for per-example caches


def batches(dataset: Dataset, batch_rows: int, seed: int = 0, shuffle: bool = True):
    """Yield batches covering the dataset exactly once; final batch may be short."""
    if batch_rows < 1:
        raise ValueError(f"batch size must be >= 1, got {batch_rows}")
    n = dataset.n_rows
    if batch_rows > n:
        warnings.warn(f"batch size {batch_rows} exceeds dataset rows {n}; using one batch")
    order = np.arange(n)
    if shuffle:
        order = np.random.default_rng(seed).permutation(n)
    for lo in range(0, n, batch_rows):
        idx = order[lo:lo + batch_rows]
        yield Batch(dataset.features[idx], dataset.labels[idx], idx)
