"""CLI: extract embedding bundles from images through a vision backbone."""

from __future__ import annotations

import argparse
import sys

from .extract import ExtractionJob, extract
from .registry import DownloadError, backbone_names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extract",
        description="Extract penultimate-layer features into an embedding bundle",
    )
    parser.add_argument("--backbone", required=True, choices=backbone_names())
    parser.add_argument(
        "--dataset",
        required=True,
        help="torchvision id (cifar10, cifar100, stl10) or folder:<dir> with one subdirectory per class",
    )
    parser.add_argument("--split", choices=["train", "test"], default="train")
    parser.add_argument("--out", required=True, help="bundle path; .json and .index.csv sit alongside")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--device", default="cpu")
    parser.add_argument(
        "--weights",
        choices=["pretrained", "none"],
        default="pretrained",
        help="'none' gives a seeded random init (for format/determinism testing offline)",
    )
    parser.add_argument("--seed", type=int, default=0, help="weight init seed for --weights none")
    parser.add_argument("--limit", type=int, default=None, help="extract only the first N images")
    parser.add_argument("--cache-dir", default="datasets", help="torchvision download cache")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job = ExtractionJob(
        backbone=args.backbone,
        dataset=args.dataset,
        split=args.split,
        out=args.out,
        batch_size=args.batch_size,
        device=args.device,
        weights=args.weights,
        seed=args.seed,
        limit=args.limit,
        cache_dir=args.cache_dir,
    )
    try:
        summary = extract(job)
    except DownloadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FileNotFoundError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(
        f"wrote {summary['bundle']}: {summary['records']} records, dim {summary['dim']} "
        f"({summary['backbone_id']})"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
