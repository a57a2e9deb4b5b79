"""Backbone loading, preprocessing, and penultimate-activation extraction.

The embedding contract: bicubic resize to a fixed (height, width), scale to
[0, 1], ImageNet channel normalization, forward through DenseNet-121's dense
blocks, global average pool -> 1024 floats. The contract is fixed so a model
trained against one sidecar never silently consumes another's features.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torchvision.models import densenet121

EMBED_DIM = 1024
MODEL_NAME = "ndnetgaming-densenet121"

# backbone's published training statistics (ImageNet)
_MEAN = torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
_STD = torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)


class WeightsError(Exception):
    """Missing or incompatible weights file."""


@dataclass(frozen=True)
class SidecarConfig:
    weights_path: str
    port: int = 8731
    input_size: tuple[int, int] = (768, 432)  # (height, width)
    batch_limit: int = 8

    def __post_init__(self):
        h, w = self.input_size
        if h % 16 or w % 16 or h == 0 or w == 0:
            raise ValueError(f"input_size {self.input_size} must be divisible by 16")
        if not os.path.exists(self.weights_path):
            raise WeightsError(f"weights file not found: {self.weights_path}")


def load_backbone(weights_path: str) -> torch.nn.Module:
    """DenseNet-121 feature extractor with weights from a state-dict file."""
    net = densenet121(weights=None)
    try:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        net.load_state_dict(state)
    except (RuntimeError, KeyError, FileNotFoundError, ValueError) as exc:
        raise WeightsError(f"cannot load weights from {weights_path}: {exc}") from exc
    backbone = net.features
    backbone.eval()
    for p in backbone.parameters():
        p.requires_grad_(False)
    return backbone


def preprocess(rgb: np.ndarray, input_size: tuple[int, int] = (768, 432)) -> torch.Tensor:
    """8-bit interleaved RGB -> normalized (1, 3, H, W) float tensor."""
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.shape[0] == 0 or rgb.shape[1] == 0:
        raise ValueError(f"expected a nonzero (h, w, 3) image, got shape {rgb.shape}")
    x = torch.tensor(np.ascontiguousarray(rgb), dtype=torch.float32)
    x = x.permute(2, 0, 1).unsqueeze(0)
    if tuple(x.shape[2:]) != input_size:
        x = F.interpolate(x, size=input_size, mode="bicubic", align_corners=False)
    x = x.clamp(0.0, 255.0) / 255.0
    return (x - _MEAN) / _STD


@torch.inference_mode()
def extract_penultimate(backbone: torch.nn.Module, tensor: torch.Tensor) -> np.ndarray:
    """Forward to the last dense block, ReLU, global average pool -> 1024 f32."""
    feats = backbone(tensor)
    feats = F.relu(feats)
    pooled = F.adaptive_avg_pool2d(feats, 1).flatten(1)
    out = pooled.squeeze(0).cpu().numpy().astype("<f4")
    if out.shape != (EMBED_DIM,):
        raise WeightsError(f"backbone produced {out.shape}, expected ({EMBED_DIM},)")
    return out
