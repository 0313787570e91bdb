from __future__ import annotations

import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from extractor.extract import ExtractionJob, extract
from extractor.registry import REGISTRY, DownloadError, build_backbone

# the primary engine is consumed strictly through its external interfaces:
# the bundle file format (via its loader) and its CLI
import protoclass


@pytest.fixture(scope="module")
def image_folder(tmp_path_factory):
    """Two classes x five 64x64 images with deterministic pixel content."""
    root = tmp_path_factory.mktemp("images")
    rng = np.random.default_rng(7)
    for cls in ("cat", "dog"):
        (root / cls).mkdir()
        for i in range(5):
            pixels = rng.integers(0, 255, size=(64, 64, 3), dtype=np.uint8)
            Image.fromarray(pixels, "RGB").save(root / cls / f"{i}.png")
    return root


@pytest.fixture(scope="module")
def ten_image_bundle(image_folder, tmp_path_factory):
    out = tmp_path_factory.mktemp("bundles") / "ten.bin"
    job = ExtractionJob(
        backbone="vit_b_16",
        dataset=f"folder:{image_folder}",
        split="train",
        out=str(out),
        batch_size=4,
        weights="none",
        seed=1,
    )
    summary = extract(job)
    return out, summary


def test_ten_images_give_d768_bundle(ten_image_bundle):
    out, summary = ten_image_bundle
    assert summary["records"] == 10
    assert summary["dim"] == 768
    assert out.exists()
    # 24-byte header + 10 labels + 10*768 floats
    assert out.stat().st_size == 24 + 10 * 4 + 10 * 768 * 4


def test_primary_loader_accepts_bundle(ten_image_bundle):
    out, summary = ten_image_bundle
    ds = protoclass.load_bundle(out)
    assert len(ds) == 10
    assert ds.dim == 768
    assert ds.manifest.class_names == ("cat", "dog")
    assert list(ds.labels) == [0] * 5 + [1] * 5
    # loader's view matches the harness log
    assert len(ds) == summary["records"]
    assert ds.dim == summary["dim"]
    assert ds.manifest.backbone_id == summary["backbone_id"]


def test_index_map_joins_records_to_images(ten_image_bundle, image_folder):
    out, _ = ten_image_bundle
    lines = (out.parent / "ten.bin.index.csv").read_text().strip().split("\n")
    assert lines[0] == "index,image_path,label"
    assert len(lines) == 11
    first = lines[1].split(",")
    assert first[0] == "0"
    assert first[1].endswith("cat/0.png")
    assert first[2] == "0"
    last = lines[-1].split(",")
    assert last[1].endswith("dog/4.png")
    assert last[2] == "1"


def test_reextraction_byte_identical(ten_image_bundle, image_folder, tmp_path):
    out, _ = ten_image_bundle
    again = tmp_path / "again.bin"
    extract(
        ExtractionJob(
            backbone="vit_b_16",
            dataset=f"folder:{image_folder}",
            split="train",
            out=str(again),
            batch_size=4,
            weights="none",
            seed=1,
        )
    )
    assert again.read_bytes() == out.read_bytes()


def test_batch_size_does_not_change_output(ten_image_bundle, image_folder, tmp_path):
    out, _ = ten_image_bundle
    other = tmp_path / "b2.bin"
    extract(
        ExtractionJob(
            backbone="vit_b_16",
            dataset=f"folder:{image_folder}",
            split="train",
            out=str(other),
            batch_size=10,
            weights="none",
            seed=1,
        )
    )
    a = protoclass.load_bundle(out)
    b = protoclass.load_bundle(other)
    np.testing.assert_allclose(a.vectors, b.vectors, atol=1e-5)
    assert list(a.labels) == list(b.labels)


def test_primary_cli_inspects_bundle(ten_image_bundle):
    out, _ = ten_image_bundle
    proc = subprocess.run(
        [sys.executable, "-m", "protoclass.cli", "inspect", "--in", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "records:       10" in proc.stdout
    assert "dim:           768" in proc.stdout
    assert "cat: 5 records" in proc.stdout


def test_fit_and_explain_on_extracted_bundle(ten_image_bundle, tmp_path):
    out, _ = ten_image_bundle
    protos = tmp_path / "p.bin"
    proc = subprocess.run(
        [
            sys.executable, "-m", "protoclass.cli", "fit",
            "--train", str(out), "--method", "kmeans_nearest",
            "--budget-count", "2", "--out", str(protos),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    report = tmp_path / "r.json"
    proc = subprocess.run(
        [
            sys.executable, "-m", "protoclass.cli", "explain",
            "--prototypes", str(protos), "--queries", str(out),
            "--query", "0", "--top", "2", "--bottom", "2", "--out", str(report),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert report.exists()


def test_extractor_cli_subprocess(image_folder, tmp_path):
    out = tmp_path / "cli.bin"
    args = [
        sys.executable, "-m", "extractor.cli",
        "--backbone", "vit_b_16", "--dataset", f"folder:{image_folder}",
        "--split", "train", "--out", str(out),
        "--weights", "none", "--seed", "3", "--limit", "4",
    ]
    proc = subprocess.run(args, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "4 records, dim 768" in proc.stdout
    ds = protoclass.load_bundle(out)
    assert len(ds) == 4


def test_registry_dims_match_backbone_output(image_folder):
    # resnet50 pools to 2048; quick single-image check
    model, transform, provenance = build_backbone("resnet50", weights="none", seed=0)
    img = Image.open(next((image_folder / "cat").iterdir())).convert("RGB")
    import torch

    with torch.no_grad():
        feats = model(transform(img).unsqueeze(0))
    assert feats.shape == (1, REGISTRY["resnet50"].dim)
    assert provenance.endswith("none-seed0")


def test_registry_declared_dims():
    assert REGISTRY["vit_b_16"].dim == 768
    assert REGISTRY["vit_l_16"].dim == 1024
    assert REGISTRY["resnet50"].dim == 2048
    assert REGISTRY["resnet101"].dim == 2048
    assert REGISTRY["vgg16"].dim == 4096


def test_pretrained_weights_path(image_folder, tmp_path):
    """Offline sandboxes surface a clean download failure; networked ones extract."""
    job = ExtractionJob(
        backbone="vit_b_16",
        dataset=f"folder:{image_folder}",
        out=str(tmp_path / "pre.bin"),
        weights="pretrained",
        limit=1,
    )
    try:
        summary = extract(job)
    except DownloadError as exc:
        assert "could not be obtained" in str(exc)
    else:
        assert summary["dim"] == 768
        assert "IMAGENET" in summary["backbone_id"]


def test_missing_folder_errors():
    with pytest.raises(FileNotFoundError):
        extract(ExtractionJob(backbone="vit_b_16", dataset="folder:/nope", out="x.bin", weights="none"))


def test_unknown_dataset_errors(tmp_path):
    with pytest.raises(ValueError, match="unknown dataset"):
        extract(
            ExtractionJob(
                backbone="vit_b_16", dataset="imagenet99", out=str(tmp_path / "x.bin"), weights="none"
            )
        )
