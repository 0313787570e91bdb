"""Backbone registry: how to build each network, strip its classifier head,
and which feature width the penultimate (pre-classifier, pooled) layer has.

Weights come either from the torchvision hub (``pretrained``) or from a
seeded random initialization (``none``), recorded in the provenance string so
bundles are always attributable to the exact weights that produced them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import torch
from torch import nn
from torchvision import models
from torchvision import transforms as T


class DownloadError(RuntimeError):
    """Pretrained weights could not be obtained."""


@dataclass(frozen=True)
class BackboneSpec:
    name: str
    dim: int
    builder: Callable[..., nn.Module]
    weights_enum: object
    strip_head: Callable[[nn.Module], None]


def _strip_vit(model: nn.Module) -> None:
    model.heads = nn.Identity()


def _strip_resnet(model: nn.Module) -> None:
    model.fc = nn.Identity()


def _strip_vgg(model: nn.Module) -> None:
    # keep fc1 -> relu -> dropout -> fc2 -> relu -> dropout, drop the final classifier
    model.classifier[6] = nn.Identity()


REGISTRY: dict[str, BackboneSpec] = {
    "vit_b_16": BackboneSpec(
        "vit_b_16", 768, models.vit_b_16, models.ViT_B_16_Weights.DEFAULT, _strip_vit
    ),
    "vit_l_16": BackboneSpec(
        "vit_l_16", 1024, models.vit_l_16, models.ViT_L_16_Weights.DEFAULT, _strip_vit
    ),
    "resnet50": BackboneSpec(
        "resnet50", 2048, models.resnet50, models.ResNet50_Weights.DEFAULT, _strip_resnet
    ),
    "resnet101": BackboneSpec(
        "resnet101", 2048, models.resnet101, models.ResNet101_Weights.DEFAULT, _strip_resnet
    ),
    "vgg16": BackboneSpec(
        "vgg16", 4096, models.vgg16, models.VGG16_Weights.DEFAULT, _strip_vgg
    ),
}

# evaluation-mode preprocessing used when no hub weights (and hence no bundled
# transform recipe) are in play
_FALLBACK_TRANSFORM = T.Compose(
    [
        T.Resize(256),
        T.CenterCrop(224),
        T.ToTensor(),
        T.Normalize(mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]),
    ]
)


def backbone_names() -> list[str]:
    return sorted(REGISTRY)


def build_backbone(name: str, weights: str = "pretrained", seed: int = 0):
    """Return (model in eval mode, preprocessing transform, provenance string)."""
    if name not in REGISTRY:
        raise ValueError(f"unknown backbone {name!r} (expected one of {backbone_names()})")
    spec = REGISTRY[name]
    if weights == "pretrained":
        enum = spec.weights_enum
        try:
            model = spec.builder(weights=enum)
        except Exception as exc:
            raise DownloadError(
                f"pretrained weights for {name} could not be obtained: {exc}"
            ) from exc
        transform = enum.transforms()
        provenance = f"torchvision/{name}@{enum.name}"
    elif weights == "none":
        torch.manual_seed(seed)
        model = spec.builder(weights=None)
        transform = _FALLBACK_TRANSFORM
        provenance = f"torchvision/{name}@none-seed{seed}"
    else:
        raise ValueError(f"weights must be 'pretrained' or 'none', got {weights!r}")
    spec.strip_head(model)
    model.eval()
    return model, transform, provenance
