"""Labeled embedding datasets and their on-disk interchange format.

A bundle is a little-endian binary file:

    bytes 0-7   ASCII magic "IDEALEMB"
    u32         format version (currently 1)
    u64         n, number of records
    u32         d, vector dimension
    n x u32     class labels
    n x d x f32 vectors, row-major

with a JSON sidecar manifest at ``<bundle path>.json``. Vectors are stored
as 32-bit floats; all statistics are accumulated in 64-bit.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import (
    BadMagicError,
    DimensionMismatchError,
    FormatError,
    NonFiniteValueError,
    NumericError,
    TruncatedPayloadError,
    UsageError,
    VersionMismatchError,
)

MAGIC = b"IDEALEMB"
FORMAT_VERSION = 1
HEADER_SIZE = 8 + 4 + 8 + 4

NORMALIZATION_MODES = ("none", "unit_l2", "zscore")

# std below this is treated as constant-dimension and left unscaled
ZSCORE_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class EmbeddingRecord:
    """One labeled feature vector; ``index`` is its position in the source dataset."""

    index: int
    label: int
    vector: np.ndarray


@dataclass(frozen=True)
class DatasetManifest:
    dataset_name: str
    backbone_id: str
    dim: int
    class_names: tuple[str, ...]
    normalization: str
    record_count: int

    def to_json_dict(self) -> dict:
        return {
            "dataset_name": self.dataset_name,
            "backbone_id": self.backbone_id,
            "dim": self.dim,
            "class_names": list(self.class_names),
            "normalization": self.normalization,
            "record_count": self.record_count,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "DatasetManifest":
        try:
            return cls(
                dataset_name=str(data["dataset_name"]),
                backbone_id=str(data["backbone_id"]),
                dim=int(data["dim"]),
                class_names=tuple(str(c) for c in data["class_names"]),
                normalization=str(data["normalization"]),
                record_count=int(data["record_count"]),
            )
        except KeyError as exc:
            raise FormatError(f"manifest is missing key {exc}") from exc

    def fingerprint(self) -> dict:
        """The identity a prototype set is bound to."""
        return {
            "backbone_id": self.backbone_id,
            "dim": self.dim,
            "normalization": self.normalization,
        }


class EmbeddingDataset:
    """Immutable labeled embedding collection backed by numpy arrays."""

    def __init__(self, manifest: DatasetManifest, labels: np.ndarray, vectors: np.ndarray):
        labels = np.ascontiguousarray(labels, dtype=np.uint32)
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise UsageError("vectors must be a 2-D array")
        if labels.shape[0] != vectors.shape[0]:
            raise DimensionMismatchError(
                f"{labels.shape[0]} labels but {vectors.shape[0]} vectors"
            )
        if manifest.record_count != vectors.shape[0]:
            raise DimensionMismatchError(
                f"manifest record_count={manifest.record_count} but payload holds "
                f"{vectors.shape[0]} records"
            )
        if manifest.dim != vectors.shape[1]:
            raise DimensionMismatchError(
                f"manifest dim={manifest.dim} but payload vectors have dim {vectors.shape[1]}"
            )
        if manifest.normalization not in NORMALIZATION_MODES:
            raise UsageError(f"unknown normalization mode {manifest.normalization!r}")
        bad = ~np.isfinite(vectors)
        if bad.any():
            rec, comp = np.argwhere(bad)[0]
            raise NonFiniteValueError(
                f"non-finite component {comp} in record {rec}"
            )
        if labels.size and int(labels.max()) >= len(manifest.class_names):
            rec = int(np.argmax(labels >= len(manifest.class_names)))
            raise FormatError(
                f"record {rec} has label {int(labels[rec])} but manifest declares only "
                f"{len(manifest.class_names)} classes"
            )
        labels.flags.writeable = False
        vectors.flags.writeable = False
        self.manifest = manifest
        self.labels = labels
        self.vectors = vectors

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def record(self, i: int) -> EmbeddingRecord:
        return EmbeddingRecord(index=i, label=int(self.labels[i]), vector=self.vectors[i])

    def __iter__(self) -> Iterator[EmbeddingRecord]:
        for i in range(len(self)):
            yield self.record(i)

    @property
    def records(self) -> list[EmbeddingRecord]:
        return list(self)

    def present_classes(self) -> list[int]:
        return sorted(int(c) for c in np.unique(self.labels)) if len(self) else []

    def class_name(self, class_id: int) -> str:
        return self.manifest.class_names[class_id]


def _read_exact(raw: bytes, offset: int, size: int, what: str) -> bytes:
    if len(raw) < offset + size:
        raise TruncatedPayloadError(
            f"file ends at byte {len(raw)} but {what} needs bytes "
            f"{offset}..{offset + size}"
        )
    return raw[offset : offset + size]


def load_bundle(path: str | Path) -> EmbeddingDataset:
    """Load a bundle and its sidecar manifest, validating every invariant.

    A missing sidecar is tolerated: a minimal manifest is synthesized from the
    header so foreign bundles can still be inspected.
    """
    path = Path(path)
    raw = path.read_bytes()
    magic = _read_exact(raw, 0, 8, "magic")
    if magic != MAGIC:
        raise BadMagicError(f"bad magic at offset 0: expected {MAGIC!r}, found {magic!r}")
    (version,) = struct.unpack_from("<I", _read_exact(raw, 8, 4, "version"))
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"unsupported version {version} at offset 8 (expected {FORMAT_VERSION})"
        )
    (n,) = struct.unpack_from("<Q", _read_exact(raw, 12, 8, "record count"))
    (d,) = struct.unpack_from("<I", _read_exact(raw, 20, 4, "dimension"))
    expected = HEADER_SIZE + 4 * n + 4 * n * d
    if len(raw) < expected:
        raise TruncatedPayloadError(
            f"header declares n={n}, d={d} ({expected} bytes) but file ends at "
            f"byte {len(raw)}"
        )
    if len(raw) > expected:
        raise FormatError(
            f"{len(raw) - expected} trailing bytes after offset {expected} "
            f"(header declares n={n}, d={d})"
        )
    labels = np.frombuffer(raw, dtype="<u4", count=n, offset=HEADER_SIZE)
    vectors = np.frombuffer(raw, dtype="<f4", count=n * d, offset=HEADER_SIZE + 4 * n)
    vectors = vectors.reshape(n, d)

    manifest_path = Path(str(path) + ".json")
    if manifest_path.exists():
        try:
            manifest = DatasetManifest.from_json_dict(json.loads(manifest_path.read_text()))
        except json.JSONDecodeError as exc:
            raise FormatError(f"unreadable manifest {manifest_path}: {exc}") from exc
        if manifest.dim != d:
            raise DimensionMismatchError(
                f"manifest dim={manifest.dim} but bundle header declares d={d}"
            )
        if manifest.record_count != n:
            raise DimensionMismatchError(
                f"manifest record_count={manifest.record_count} but bundle header "
                f"declares n={n}"
            )
    else:
        n_classes = int(labels.max()) + 1 if n else 0
        manifest = DatasetManifest(
            dataset_name=path.stem,
            backbone_id="unknown",
            dim=d,
            class_names=tuple(f"class_{i}" for i in range(n_classes)),
            normalization="none",
            record_count=n,
        )
    return EmbeddingDataset(manifest, labels, vectors)


def save_bundle(dataset: EmbeddingDataset, path: str | Path) -> None:
    """Write the bundle and its sidecar manifest. Byte-deterministic."""
    path = Path(path)
    n, d = dataset.vectors.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<8sIQI", MAGIC, FORMAT_VERSION, n, d))
        fh.write(dataset.labels.astype("<u4").tobytes())
        fh.write(dataset.vectors.astype("<f4").tobytes())
    manifest_text = json.dumps(dataset.manifest.to_json_dict(), indent=2) + "\n"
    Path(str(path) + ".json").write_text(manifest_text)


def import_csv(
    path: str | Path,
    dataset_name: str | None = None,
    backbone_id: str = "csv-import",
    class_names: tuple[str, ...] | None = None,
) -> EmbeddingDataset:
    """Read header-less ``label,v1,...,vd`` rows into a dataset."""
    path = Path(path)
    labels: list[int] = []
    rows: list[list[float]] = []
    dim = None
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if dim is None:
                dim = len(parts) - 1
                if dim < 1:
                    raise FormatError(f"{path}:{lineno + 1}: row has no vector components")
            elif len(parts) - 1 != dim:
                raise DimensionMismatchError(
                    f"{path}:{lineno + 1}: expected {dim} components, found {len(parts) - 1}"
                )
            try:
                label = int(parts[0])
                vec = [float(v) for v in parts[1:]]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno + 1}: {exc}") from exc
            if label < 0:
                raise FormatError(f"{path}:{lineno + 1}: negative label {label}")
            labels.append(label)
            rows.append(vec)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    n_classes = max(labels) + 1
    if class_names is None:
        class_names = tuple(f"class_{i}" for i in range(n_classes))
    manifest = DatasetManifest(
        dataset_name=dataset_name or path.stem,
        backbone_id=backbone_id,
        dim=dim,
        class_names=class_names,
        normalization="none",
        record_count=len(rows),
    )
    return EmbeddingDataset(manifest, np.asarray(labels), np.asarray(rows, dtype=np.float32))


@dataclass(frozen=True)
class Normalizer:
    """Fitted normalization map, reusable on later queries.

    ``mean``/``std`` are populated for zscore only; they are the float64
    statistics of the dataset the normalizer was fitted on.
    """

    mode: str
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    @classmethod
    def fit(cls, dataset: EmbeddingDataset, mode: str) -> "Normalizer":
        if mode not in NORMALIZATION_MODES:
            raise UsageError(f"unknown normalization mode {mode!r}")
        if len(dataset) == 0:
            raise UsageError("cannot normalize an empty dataset")
        if mode != "zscore":
            return cls(mode=mode)
        vecs = dataset.vectors.astype(np.float64)
        mean = vecs.mean(axis=0)
        std = vecs.std(axis=0)
        std = np.where(std < ZSCORE_STD_FLOOR, 1.0, std)
        mean.flags.writeable = False
        std.flags.writeable = False
        return cls(mode=mode, mean=mean, std=std)

    def apply_matrix(self, vectors: np.ndarray) -> np.ndarray:
        """Transform an (m, d) float array; returns float32."""
        vecs = np.asarray(vectors, dtype=np.float64)
        if self.mode == "none":
            return np.asarray(vectors, dtype=np.float32)
        if self.mode == "unit_l2":
            norms = np.sqrt(np.einsum("ij,ij->i", vecs, vecs))
            zero = norms == 0.0
            if zero.any():
                raise NumericError(
                    f"cannot unit_l2-normalize zero vector at record {int(np.argmax(zero))}"
                )
            return (vecs / norms[:, None]).astype(np.float32)
        return ((vecs - self.mean) / self.std).astype(np.float32)

    def apply_dataset(self, dataset: EmbeddingDataset) -> EmbeddingDataset:
        vectors = self.apply_matrix(dataset.vectors)
        manifest = replace(dataset.manifest, normalization=self.mode)
        return EmbeddingDataset(manifest, dataset.labels, vectors)

    def to_json_dict(self) -> dict:
        out: dict = {"mode": self.mode}
        if self.mode == "zscore":
            out["mean"] = [float(v) for v in self.mean]
            out["std"] = [float(v) for v in self.std]
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "Normalizer":
        mode = data["mode"]
        if mode != "zscore":
            return cls(mode=mode)
        mean = np.asarray(data["mean"], dtype=np.float64)
        std = np.asarray(data["std"], dtype=np.float64)
        mean.flags.writeable = False
        std.flags.writeable = False
        return cls(mode=mode, mean=mean, std=std)


def normalize(dataset: EmbeddingDataset, mode: str) -> tuple[EmbeddingDataset, Normalizer]:
    """Fit ``mode`` on the dataset and apply it, returning the fitted map too."""
    norm = Normalizer.fit(dataset, mode)
    return norm.apply_dataset(dataset), norm


def split_by_class(dataset: EmbeddingDataset) -> dict[int, list[EmbeddingRecord]]:
    """Partition records by label; each list preserves the original order."""
    out: dict[int, list[EmbeddingRecord]] = {}
    for rec in dataset:
        out.setdefault(rec.label, []).append(rec)
    return dict(sorted(out.items()))
