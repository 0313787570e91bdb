"""Embedding bundle extraction harness for pretrained vision backbones."""

from .extract import ExtractionJob, extract
from .registry import REGISTRY, DownloadError, backbone_names, build_backbone
from .writer import index_map_path, write_bundle, write_index_map

__version__ = "0.1.0"
