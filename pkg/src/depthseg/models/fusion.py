"""Additive RGB/depth embedding fusion with one learnable scalar."""

from __future__ import annotations

import torch
import torch.nn as nn

from ..errors import ContractViolation
from .encoder import FeatureEmbedding


class FusionParams(nn.Module):
    """Holds the fusion scale alpha.

    Initialized at 0.1: close enough to the plain RGB model to be safe,
    but nonzero so gradients reach the depth branch from step one.
    """

    def __init__(self, alpha: float = 0.1):
        super().__init__()
        self.alpha = nn.Parameter(torch.tensor(float(alpha), dtype=torch.float32))

    @property
    def value(self) -> float:
        return float(self.alpha.detach())


def fuse(f_rgb: FeatureEmbedding, f_dep: FeatureEmbedding,
         params: FusionParams) -> FeatureEmbedding:
    """fused = rgb + alpha * depth, elementwise."""
    if f_rgb.grid.shape != f_dep.grid.shape:
        raise ContractViolation(
            f"embedding shapes differ: {tuple(f_rgb.grid.shape)} vs {tuple(f_dep.grid.shape)}")
    if f_rgb.source != "rgb" or f_dep.source != "depth":
        raise ContractViolation(
            f"fuse expects (rgb, depth) sources, got ({f_rgb.source}, {f_dep.source})")
    return FeatureEmbedding(grid=f_rgb.grid + params.alpha * f_dep.grid, source="fused")
