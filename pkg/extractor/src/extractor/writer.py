"""Writer for the embedding bundle interchange format.

Implemented against the documented interchange format, independently of any consumer:

    bytes 0-7   ASCII magic "IDEALEMB"
    u32         version = 1
    u64         n records
    u32         d dimension
    n x u32     labels
    n x d x f32 vectors, row-major, little-endian, no padding

plus a JSON manifest sidecar at ``<path>.json`` and an index map CSV
``<path stem>.index.csv`` with rows ``index,image_path,label``.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"IDEALEMB"
VERSION = 1


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_bundle(
    path: str | Path,
    labels: np.ndarray,
    vectors: np.ndarray,
    dataset_name: str,
    backbone_id: str,
    class_names: list[str],
) -> None:
    """Write bundle + manifest atomically; vectors are cast to float32."""
    path = Path(path)
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    labels = np.ascontiguousarray(labels, dtype="<u4")
    n, d = vectors.shape
    if labels.shape != (n,):
        raise ValueError(f"{n} vectors but {labels.shape[0]} labels")
    header = struct.pack("<8sIQI", MAGIC, VERSION, n, d)
    _atomic_write_bytes(path, header + labels.tobytes() + vectors.tobytes())
    manifest = {
        "dataset_name": dataset_name,
        "backbone_id": backbone_id,
        "dim": d,
        "class_names": list(class_names),
        "normalization": "none",
        "record_count": n,
    }
    _atomic_write_bytes(
        Path(str(path) + ".json"), (json.dumps(manifest, indent=2) + "\n").encode()
    )


def write_index_map(path: str | Path, rows: list[tuple[int, str, int]]) -> None:
    """``index,image_path,label`` rows joining record indices back to images."""
    lines = ["index,image_path,label"]
    lines += [f"{i},{p},{lab}" for i, p, lab in rows]
    _atomic_write_bytes(Path(path), ("\n".join(lines) + "\n").encode())


def index_map_path(bundle_path: str | Path) -> Path:
    return Path(str(bundle_path) + ".index.csv")
