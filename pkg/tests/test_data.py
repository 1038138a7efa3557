import struct

import numpy as np
import pytest

from polycascade.data import (DataFormatError, Dataset, TransformSpec, batches,
                              fit_apply_transforms, invert_minmax, load_delimited, load_idx)


def write_idx_pair(tmp_path, images, labels, image_magic=0x803, label_magic=0x801,
                   truncate_images=0, label_count=None):
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    img_path = tmp_path / "images-idx3-ubyte"
    lbl_path = tmp_path / "labels-idx1-ubyte"
    payload = struct.pack(">IIII", image_magic, n, rows, cols) + images.tobytes()
    if truncate_images:
        payload = payload[:-truncate_images]
    img_path.write_bytes(payload)
    lbl_path.write_bytes(struct.pack(">II", label_magic,
                                     n if label_count is None else label_count)
                         + labels.tobytes())
    return img_path, lbl_path


def test_load_idx_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, (10, 4, 5), dtype=np.uint8)
    labels = rng.integers(0, 10, 10, dtype=np.uint8)
    img, lbl = write_idx_pair(tmp_path, images, labels)
    ds = load_idx(img, lbl)
    assert ds.features.shape == (10, 20)
    assert np.array_equal(ds.features, images.reshape(10, 20).astype(float))
    assert np.array_equal(ds.labels, labels)


def test_load_idx_bad_magic(tmp_path):
    img, lbl = write_idx_pair(tmp_path, np.zeros((2, 2, 2), np.uint8), [0, 1],
                              image_magic=0x804)
    with pytest.raises(DataFormatError, match="magic"):
        load_idx(img, lbl)


def test_load_idx_truncated_names_byte_count(tmp_path):
    img, lbl = write_idx_pair(tmp_path, np.zeros((3, 2, 2), np.uint8), [0, 1, 2],
                              truncate_images=5)
    with pytest.raises(DataFormatError, match="12 bytes"):
        load_idx(img, lbl)


def test_load_idx_count_mismatch(tmp_path):
    img, lbl = write_idx_pair(tmp_path, np.zeros((3, 2, 2), np.uint8), [0, 1, 2],
                              label_count=4)
    with pytest.raises(DataFormatError, match="4 labels"):
        load_idx(img, lbl)


def test_load_delimited_layout(tmp_path):
    p = tmp_path / "data.csv"
    p.write_text("1,0.5,2.5\n0,1.5,3.5\n")
    ds = load_delimited(p, label_column=0)
    assert ds.features.shape == (2, 2)
    assert np.array_equal(ds.labels, [1.0, 0.0])
    assert np.array_equal(ds.features, [[0.5, 2.5], [1.5, 3.5]])


def test_load_delimited_last_column_label(tmp_path):
    p = tmp_path / "data.tsv"
    p.write_text("0.5\t2.5\t1\n1.5\t3.5\t0\n")
    ds = load_delimited(p, label_column=-1, delimiter="\t")
    assert np.array_equal(ds.labels, [1.0, 0.0])
    assert np.array_equal(ds.features, [[0.5, 2.5], [1.5, 3.5]])


def test_load_delimited_ragged_row(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,2,3\n4,5\n")
    with pytest.raises(DataFormatError, match="row 2"):
        load_delimited(p)


def test_load_delimited_non_numeric_coordinates(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,2,3\n4,oops,6\n")
    with pytest.raises(DataFormatError, match="row 2, column 2"):
        load_delimited(p)


def test_load_delimited_empty(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(DataFormatError, match="empty"):
        load_delimited(p)


def test_dataset_split_views():
    ds = Dataset(np.arange(12.0).reshape(6, 2), np.arange(6), n_train=4)
    assert ds.train.n_rows == 4
    assert ds.test.n_rows == 2
    assert np.array_equal(ds.test.labels, [4, 5])


def test_minmax_endpoints():
    features = np.array([[0.0], [100.0], [255.0]])
    ds = Dataset(features, np.zeros(3))
    out, spec = fit_apply_transforms(ds, TransformSpec())
    assert out.features[0, 0] == -1.0
    assert out.features[2, 0] == 1.0
    assert spec.fitted


def test_constant_column_maps_to_zero():
    features = np.array([[5.0, 1.0], [5.0, 2.0]])
    out, _ = fit_apply_transforms(Dataset(features, np.zeros(2)), TransformSpec())
    assert np.all(out.features[:, 0] == 0.0)


def test_log_and_log1p_columns():
    features = np.array([[1.0, 0.0], [np.e, 1.0]])
    spec = TransformSpec(log_columns=(0,), log1p_columns=(1,))
    out, fitted = fit_apply_transforms(Dataset(features, np.zeros(2)), spec)
    # after log: col0 = [0, 1]; after log1p: col1 = [0, ln 2]; both min-max to [-1, 1]
    assert np.allclose(out.features, [[-1.0, -1.0], [1.0, 1.0]])
    assert fitted.col_min[0] == 0.0


def test_log_rejects_non_positive():
    spec = TransformSpec(log_columns=(0,))
    with pytest.raises(DataFormatError, match="log column 0"):
        fit_apply_transforms(Dataset(np.array([[0.0], [1.0]]), np.zeros(2)), spec)
    spec1p = TransformSpec(log1p_columns=(0,))
    with pytest.raises(DataFormatError, match="log1p column 0"):
        fit_apply_transforms(Dataset(np.array([[-1.0], [1.0]]), np.zeros(2)), spec1p)


def test_bounds_fitted_on_training_split_only():
    # poisoning the test rows must not change the fitted bounds
    rng = np.random.default_rng(3)
    train_rows = rng.uniform(0, 1, (50, 3))
    clean = Dataset(np.vstack([train_rows, rng.uniform(0, 1, (20, 3))]),
                    np.zeros(70), n_train=50)
    poisoned = Dataset(np.vstack([train_rows, 1e6 * np.ones((20, 3))]),
                       np.zeros(70), n_train=50)
    _, spec_clean = fit_apply_transforms(clean, TransformSpec())
    out_poisoned, spec_poisoned = fit_apply_transforms(poisoned, TransformSpec())
    assert spec_clean.col_min == spec_poisoned.col_min
    assert spec_clean.col_max == spec_poisoned.col_max
    # training rows stay inside [-1, 1]; poisoned test rows may exceed it
    assert np.abs(out_poisoned.features[:50]).max() <= 1.0 + 1e-9
    assert out_poisoned.features[50:].max() > 1.0


def test_clamp_flag():
    ds = Dataset(np.array([[0.0], [1.0], [2.0]]), np.zeros(3), n_train=2)
    out, _ = fit_apply_transforms(ds, TransformSpec(clamp=True))
    assert out.features.max() <= 1.0


def test_fitted_spec_reapplies_without_refit():
    rng = np.random.default_rng(1)
    ds = Dataset(rng.uniform(-3, 7, (30, 2)), np.zeros(30))
    out1, fitted = fit_apply_transforms(ds, TransformSpec())
    other = Dataset(rng.uniform(-3, 7, (10, 2)), np.zeros(10))
    out2, fitted2 = fit_apply_transforms(other, fitted)
    assert fitted2 == fitted
    lo = np.asarray(fitted.col_min)
    hi = np.asarray(fitted.col_max)
    assert np.allclose(out2.features, 2 * (other.features - lo) / (hi - lo) - 1)


def test_normalization_roundtrip():
    rng = np.random.default_rng(2)
    features = rng.uniform(-5, 9, (40, 4))
    features[:, 2] = 3.0  # zero-range column
    ds = Dataset(features, np.zeros(40))
    out, spec = fit_apply_transforms(ds, TransformSpec())
    back = invert_minmax(out.features, spec)
    keep = [0, 1, 3]
    assert np.abs(back[:, keep] - features[:, keep]).max() <= 1e-9


def test_transform_spec_json_roundtrip():
    spec = TransformSpec(log_columns=(0, 5), log1p_columns=(3,), clamp=True,
                         col_min=(0.0, 1.0), col_max=(2.0, 3.0))
    assert TransformSpec.from_dict(spec.to_dict()) == spec


def test_batches_count_and_union():
    ds = Dataset(np.arange(20.0).reshape(10, 2), np.arange(10))
    got = list(batches(ds, 3, seed=5, shuffle=True))
    assert [b.features.shape[0] for b in got] == [3, 3, 3, 1]
    all_idx = np.concatenate([b.indices for b in got])
    assert np.array_equal(np.sort(all_idx), np.arange(10))
    for b in got:
        assert np.array_equal(b.features, ds.features[b.indices])
        assert np.array_equal(b.labels, ds.labels[b.indices])


def test_batches_file_order_without_shuffle():
    ds = Dataset(np.arange(12.0).reshape(6, 2), np.arange(6))
    got = list(batches(ds, 4, shuffle=False))
    assert np.array_equal(got[0].indices, [0, 1, 2, 3])
    assert np.array_equal(got[1].indices, [4, 5])


def test_batches_seed_determinism():
    ds = Dataset(np.arange(40.0).reshape(20, 2), np.arange(20))
    a = [b.indices for b in batches(ds, 7, seed=9)]
    b = [b.indices for b in batches(ds, 7, seed=9)]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_batches_oversized_warns_single_batch():
    ds = Dataset(np.ones((3, 2)), np.zeros(3))
    with pytest.warns(UserWarning):
        got = list(batches(ds, 10))
    assert len(got) == 1 and got[0].features.shape[0] == 3


def test_batches_at_mnist_scale():
    ds = Dataset(np.zeros((60000, 1)), np.zeros(60000))
    assert sum(1 for _ in batches(ds, 2000, shuffle=False)) == 30
