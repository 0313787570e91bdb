from __future__ import annotations

import json
import struct

import numpy as np
import pytest

from protoclass.bundle import (
    MAGIC,
    DatasetManifest,
    Normalizer,
    import_csv,
    load_bundle,
    normalize,
    save_bundle,
    split_by_class,
)
from protoclass.errors import (
    BadMagicError,
    DimensionMismatchError,
    FormatError,
    NonFiniteValueError,
    NumericError,
    TruncatedPayloadError,
    UsageError,
    VersionMismatchError,
)

from conftest import make_dataset


def write_raw_bundle(path, labels, vectors, version=1):
    """Independent writer used as the round-trip oracle."""
    vectors = np.asarray(vectors, dtype="<f4")
    labels = np.asarray(labels, dtype="<u4")
    n, d = vectors.shape
    blob = struct.pack("<8sIQI", MAGIC, version, n, d)
    blob += labels.tobytes() + vectors.tobytes()
    path.write_bytes(blob)
    return blob


def test_load_hand_written_bundle_and_round_trip(tmp_path):
    path = tmp_path / "tiny.bin"
    blob = write_raw_bundle(path, [0, 1], [[1, 0, 0], [0, 1, 0]])
    ds = load_bundle(path)
    assert len(ds) == 2
    assert ds.dim == 3
    assert list(ds.labels) == [0, 1]
    np.testing.assert_array_equal(ds.vectors, np.asarray([[1, 0, 0], [0, 1, 0]], dtype=np.float32))

    out = tmp_path / "copy.bin"
    save_bundle(ds, out)
    assert out.read_bytes() == blob


def test_save_then_load_preserves_sidecar(tmp_path):
    ds = make_dataset([0, 1, 0], np.arange(12).reshape(3, 4))
    path = tmp_path / "x.bin"
    save_bundle(ds, path)
    loaded = load_bundle(path)
    assert loaded.manifest == ds.manifest
    # resaving is byte-identical for both files
    path2 = tmp_path / "y.bin"
    save_bundle(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()
    assert (tmp_path / "x.bin.json").read_bytes() == (tmp_path / "y.bin.json").read_bytes()


def test_truncated_payload_names_offset(tmp_path):
    path = tmp_path / "trunc.bin"
    # header says n=5 but payload holds 4 rows
    vectors = np.zeros((4, 2), dtype="<f4")
    labels = np.zeros(4, dtype="<u4")
    blob = struct.pack("<8sIQI", MAGIC, 1, 5, 2) + labels.tobytes() + vectors.tobytes()
    path.write_bytes(blob)
    with pytest.raises(TruncatedPayloadError, match="n=5"):
        load_bundle(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
    with pytest.raises(BadMagicError, match="offset 0"):
        load_bundle(path)


def test_version_mismatch(tmp_path):
    path = tmp_path / "v9.bin"
    write_raw_bundle(path, [0], [[1.0]], version=9)
    with pytest.raises(VersionMismatchError, match="version 9"):
        load_bundle(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "long.bin"
    blob = write_raw_bundle(path, [0], [[1.0, 2.0]])
    path.write_bytes(blob + b"xx")
    with pytest.raises(FormatError, match="trailing"):
        load_bundle(path)


def test_non_finite_value_names_record(tmp_path):
    path = tmp_path / "nan.bin"
    vecs = np.asarray([[1.0, 2.0], [np.nan, 0.0]], dtype=np.float32)
    write_raw_bundle(path, [0, 0], vecs)
    with pytest.raises(NonFiniteValueError, match="record 1"):
        load_bundle(path)


def test_sidecar_dimension_mismatch(tmp_path):
    path = tmp_path / "dm.bin"
    write_raw_bundle(path, [0], [[1.0, 2.0]])
    manifest = DatasetManifest("x", "b", 3, ("a",), "none", 1)
    (tmp_path / "dm.bin.json").write_text(json.dumps(manifest.to_json_dict()))
    with pytest.raises(DimensionMismatchError, match="dim=3"):
        load_bundle(path)


def test_load_without_sidecar_synthesizes_manifest(tmp_path):
    path = tmp_path / "raw.bin"
    write_raw_bundle(path, [0, 2], [[1.0], [2.0]])
    ds = load_bundle(path)
    assert ds.manifest.class_names == ("class_0", "class_1", "class_2")


def test_unit_l2_three_four_five():
    ds = make_dataset([0], [[3.0, 4.0]])
    out, _ = normalize(ds, "unit_l2")
    np.testing.assert_allclose(out.vectors[0], [0.6, 0.8], rtol=1e-7)


def test_normalize_none_is_identity():
    ds = make_dataset([0, 1], [[1.5, -2.0], [0.25, 9.0]])
    out, _ = normalize(ds, "none")
    np.testing.assert_array_equal(out.vectors, ds.vectors)


def test_zscore_two_points():
    ds = make_dataset([0, 0], [[0.0, 0.0], [2.0, 2.0]])
    out, norm = normalize(ds, "zscore")
    np.testing.assert_allclose(out.vectors, [[-1.0, -1.0], [1.0, 1.0]], atol=1e-7)
    np.testing.assert_allclose(norm.mean, [1.0, 1.0])
    np.testing.assert_allclose(norm.std, [1.0, 1.0])


def test_zscore_fitted_map_applies_to_queries():
    rng = np.random.default_rng(7)
    ds = make_dataset(np.zeros(50, dtype=int), rng.normal(3.0, 2.0, (50, 4)))
    _, norm = normalize(ds, "zscore")
    q = rng.normal(3.0, 2.0, (5, 4))
    expected = (q - norm.mean) / norm.std
    np.testing.assert_allclose(norm.apply_matrix(q), expected, rtol=1e-6)


def test_zscore_constant_dimension_uses_std_one():
    ds = make_dataset([0, 0], [[5.0, 1.0], [5.0, 3.0]])
    out, norm = normalize(ds, "zscore")
    assert norm.std[0] == 1.0
    np.testing.assert_allclose(out.vectors[:, 0], [0.0, 0.0], atol=1e-7)


def test_unit_l2_idempotent():
    rng = np.random.default_rng(0)
    ds = make_dataset(np.zeros(20, dtype=int), rng.normal(size=(20, 8)))
    once, _ = normalize(ds, "unit_l2")
    twice, _ = normalize(once, "unit_l2")
    np.testing.assert_allclose(once.vectors, twice.vectors, atol=1e-7)


def test_zscore_training_mean_near_zero():
    rng = np.random.default_rng(1)
    ds = make_dataset(np.zeros(100, dtype=int), rng.normal(5.0, 3.0, (100, 6)))
    out, _ = normalize(ds, "zscore")
    means = out.vectors.astype(np.float64).mean(axis=0)
    assert np.abs(means).max() < 1e-6


def test_unit_l2_zero_vector_errors():
    ds = make_dataset([0, 0], [[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(NumericError, match="record 1"):
        normalize(ds, "unit_l2")


def test_normalize_empty_dataset_errors():
    ds = make_dataset(np.zeros(0, dtype=int), np.zeros((0, 3)), class_names=("a",))
    with pytest.raises(UsageError, match="empty"):
        normalize(ds, "zscore")


def test_split_by_class_basic():
    ds = make_dataset([0, 1, 0], [[1.0], [2.0], [3.0]])
    split = split_by_class(ds)
    assert list(split) == [0, 1]
    assert [r.index for r in split[0]] == [0, 2]
    assert [r.index for r in split[1]] == [1]


def test_split_by_class_empty():
    ds = make_dataset(np.zeros(0, dtype=int), np.zeros((0, 2)), class_names=())
    assert split_by_class(ds) == {}


def test_split_by_class_is_partition():
    rng = np.random.default_rng(4)
    labels = rng.integers(0, 7, size=500)
    ds = make_dataset(labels, rng.normal(size=(500, 3)))
    split = split_by_class(ds)
    sizes = sum(len(v) for v in split.values())
    assert sizes == len(ds)
    all_indices = [r.index for recs in split.values() for r in recs]
    assert len(set(all_indices)) == len(all_indices) == len(ds)


def test_split_cifar_shaped_dataset():
    # 50,000 records over 10 balanced classes -> 10 lists of 5,000
    labels = np.repeat(np.arange(10), 5000)
    vectors = np.zeros((50000, 2), dtype=np.float32)
    vectors[:, 0] = labels
    ds = make_dataset(labels, vectors)
    split = split_by_class(ds)
    assert sorted(split) == list(range(10))
    assert all(len(split[c]) == 5000 for c in range(10))


def test_import_csv_round_trip(tmp_path):
    csv = tmp_path / "d.csv"
    csv.write_text("0,1.5,2.5\n1,-3.0,0.125\n0,0.0,9.0\n")
    ds = import_csv(csv)
    assert len(ds) == 3
    assert ds.dim == 2
    assert list(ds.labels) == [0, 1, 0]
    np.testing.assert_allclose(ds.vectors[1], [-3.0, 0.125])


def test_import_csv_ragged_row(tmp_path):
    csv = tmp_path / "bad.csv"
    csv.write_text("0,1.0,2.0\n1,3.0\n")
    with pytest.raises(DimensionMismatchError, match="expected 2"):
        import_csv(csv)


def test_import_csv_negative_label(tmp_path):
    csv = tmp_path / "neg.csv"
    csv.write_text("-1,1.0\n")
    with pytest.raises(FormatError, match="negative"):
        import_csv(csv)


def test_normalizer_json_round_trip():
    rng = np.random.default_rng(2)
    ds = make_dataset(np.zeros(30, dtype=int), rng.normal(2.0, 0.5, (30, 5)))
    _, norm = normalize(ds, "zscore")
    clone = Normalizer.from_json_dict(json.loads(json.dumps(norm.to_json_dict())))
    q = rng.normal(size=(4, 5))
    np.testing.assert_array_equal(norm.apply_matrix(q), clone.apply_matrix(q))
