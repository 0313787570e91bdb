from __future__ import annotations

import numpy as np
import pytest

from protoclass.bundle import DatasetManifest, EmbeddingDataset


def make_dataset(
    labels,
    vectors,
    class_names=None,
    name="test",
    backbone_id="synthetic",
    normalization="none",
) -> EmbeddingDataset:
    labels = np.asarray(labels, dtype=np.uint32)
    vectors = np.asarray(vectors, dtype=np.float32)
    if class_names is None:
        n_classes = int(labels.max()) + 1 if labels.size else 0
        class_names = tuple(f"class_{i}" for i in range(n_classes))
    manifest = DatasetManifest(
        dataset_name=name,
        backbone_id=backbone_id,
        dim=vectors.shape[1],
        class_names=tuple(class_names),
        normalization=normalization,
        record_count=vectors.shape[0],
    )
    return EmbeddingDataset(manifest, labels, vectors)


def make_blobs(
    n_classes=10,
    dim=16,
    per_class_train=200,
    per_class_test=50,
    sep=12.0,
    sigma=1.0,
    seed=0,
):
    """Gaussian blobs on scaled one-hot centers: pairwise separation sep*sqrt(2)."""
    rng = np.random.default_rng(seed)
    assert n_classes <= dim
    centers = np.eye(dim)[:n_classes] * sep

    def draw(per_class):
        labels, vectors = [], []
        for c in range(n_classes):
            pts = centers[c] + sigma * rng.standard_normal((per_class, dim))
            vectors.append(pts)
            labels.extend([c] * per_class)
        return np.asarray(labels), np.concatenate(vectors).astype(np.float32)

    train_labels, train_vecs = draw(per_class_train)
    test_labels, test_vecs = draw(per_class_test)
    return make_dataset(train_labels, train_vecs), make_dataset(test_labels, test_vecs)


@pytest.fixture
def blob_data():
    return make_blobs(n_classes=4, dim=8, per_class_train=40, per_class_test=10, seed=3)
