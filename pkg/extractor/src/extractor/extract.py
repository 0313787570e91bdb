"""Batch feature extraction into embedding bundles."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .datasets import load_source
from .registry import REGISTRY, build_backbone
from .writer import index_map_path, write_bundle, write_index_map


@dataclass
class ExtractionJob:
    backbone: str
    dataset: str
    split: str = "train"
    out: str = "embeddings.bin"
    batch_size: int = 32
    device: str = "cpu"
    weights: str = "pretrained"
    seed: int = 0
    limit: int | None = None
    cache_dir: str = "datasets"


def extract(job: ExtractionJob) -> dict:
    """Run the job and write bundle, manifest sidecar, and index map.

    Inference runs in eval mode with the backbone's standard eval-time
    preprocessing, so re-running a job reproduces the bundle byte-for-byte.
    """
    if job.split not in ("train", "test"):
        raise ValueError(f"split must be train or test, got {job.split!r}")
    model, transform, provenance = build_backbone(job.backbone, job.weights, job.seed)
    expected_dim = REGISTRY[job.backbone].dim
    device = torch.device(job.device)
    model.to(device)

    source = load_source(job.dataset, job.split, job.cache_dir)
    n = len(source) if job.limit is None else min(job.limit, len(source))

    features: list[np.ndarray] = []
    with torch.no_grad():
        for start in range(0, n, job.batch_size):
            batch = [
                transform(source.open_image(pos))
                for pos in range(start, min(start + job.batch_size, n))
            ]
            out = model(torch.stack(batch).to(device))
            if out.ndim != 2 or out.shape[1] != expected_dim:
                raise RuntimeError(
                    f"{job.backbone} produced features of shape {tuple(out.shape)}, "
                    f"expected (*, {expected_dim})"
                )
            features.append(out.cpu().to(torch.float32).numpy())

    vectors = np.concatenate(features) if features else np.zeros((0, expected_dim), np.float32)
    labels = np.asarray([source.items[pos][1] for pos in range(n)], dtype=np.uint32)
    out_path = Path(job.out)
    write_bundle(
        out_path,
        labels,
        vectors,
        dataset_name=f"{source.name}:{job.split}",
        backbone_id=provenance,
        class_names=source.class_names,
    )
    write_index_map(
        index_map_path(out_path),
        [(pos, source.items[pos][0], int(labels[pos])) for pos in range(n)],
    )
    return {
        "records": int(n),
        "dim": int(expected_dim),
        "bundle": str(out_path),
        "manifest": str(out_path) + ".json",
        "index_map": str(index_map_path(out_path)),
        "backbone_id": provenance,
    }
