"""Image sources: class-per-subdirectory folders and torchvision datasets.

Every source yields a deterministic ordered list of (identifier, label) items
plus class names; identifiers are real file paths for folder datasets and
synthetic ``<dataset>/<split>/<index>`` ids for archive-backed ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from PIL import Image

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}


@dataclass
class ImageSource:
    name: str
    class_names: list[str]
    items: list[tuple[str, int]]  # (identifier, label)
    open_image: Callable[[int], Image.Image]  # by item position

    def __len__(self) -> int:
        return len(self.items)


def folder_source(root: str | Path) -> ImageSource:
    """One subdirectory per class; classes and files in sorted order."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset folder {root} does not exist")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise ValueError(f"{root} has no class subdirectories")
    class_names = [p.name for p in class_dirs]
    items: list[tuple[str, int]] = []
    for label, cdir in enumerate(class_dirs):
        files = sorted(
            p for p in cdir.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS
        )
        for f in files:
            items.append((str(f), label))
    if not items:
        raise ValueError(f"{root} contains no images")

    def open_image(pos: int) -> Image.Image:
        return Image.open(items[pos][0]).convert("RGB")

    return ImageSource(root.name, class_names, items, open_image)


def torchvision_source(dataset_id: str, split: str, cache_dir: str | Path) -> ImageSource:
    """CIFAR-10/100 or STL-10 via torchvision, downloaded into cache_dir."""
    from torchvision import datasets as tvd

    train = split == "train"
    try:
        if dataset_id == "cifar10":
            ds = tvd.CIFAR10(str(cache_dir), train=train, download=True)
        elif dataset_id == "cifar100":
            ds = tvd.CIFAR100(str(cache_dir), train=train, download=True)
        elif dataset_id == "stl10":
            ds = tvd.STL10(str(cache_dir), split="train" if train else "test", download=True)
        else:
            raise ValueError(f"unknown dataset id {dataset_id!r}")
    except ValueError:
        raise
    except Exception as exc:
        raise RuntimeError(f"dataset {dataset_id} could not be obtained: {exc}") from exc

    class_names = list(getattr(ds, "classes", []))
    items = [
        (f"{dataset_id}/{split}/{i:06d}", int(label))
        for i, label in enumerate(_labels_of(ds))
    ]

    def open_image(pos: int) -> Image.Image:
        img, _ = ds[pos]
        return img.convert("RGB") if isinstance(img, Image.Image) else Image.fromarray(img)

    return ImageSource(dataset_id, class_names, items, open_image)


def _labels_of(ds) -> list[int]:
    if hasattr(ds, "targets"):
        return [int(t) for t in ds.targets]
    if hasattr(ds, "labels"):
        return [int(t) for t in ds.labels]
    return [int(ds[i][1]) for i in range(len(ds))]


def load_source(dataset_id: str, split: str, cache_dir: str | Path) -> ImageSource:
    """``folder:<path>`` for local trees, otherwise a torchvision dataset id."""
    if dataset_id.startswith("folder:"):
        return folder_source(dataset_id[len("folder:") :])
    return torchvision_source(dataset_id, split, cache_dir)
