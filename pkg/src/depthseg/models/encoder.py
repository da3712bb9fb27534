"""Four-stage image encoder.

Stage layout: convolutional stem + residual depthwise-separable blocks,
two inverted-bottleneck stages (fused then classic MBConv), then a
linear-attention stage, followed by a 1x1 neck projecting to the shared
embedding width. Total downsampling is ``config.downsample`` (stem plus
three stride-2 transitions).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import tomli
import torch
import torch.nn as nn

from ..errors import ConfigError, ContractViolation
from .layers import AttentionBlock, ConvNormAct, DSConv, FusedMBConv, MBConv

EMBED_SOURCES = ("rgb", "depth", "fused")


def _load_presets() -> dict:
    text = resources.files("depthseg").joinpath("presets.toml").read_text()
    return tomli.loads(text)


@dataclass
class EncoderConfig:
    widths: tuple[int, int, int, int] = (8, 16, 32, 160)
    depths: tuple[int, int, int, int] = (1, 1, 2, 2)
    downsample: int = 16
    attention_heads: int = 4
    embed_dim: int = 64
    preset: str = "custom"

    def validate(self) -> None:
        problems = []
        if len(self.widths) != 4 or any(w <= 0 for w in self.widths):
            problems.append(f"widths must be 4 positive ints, got {self.widths}")
        if len(self.depths) != 4 or any(d <= 0 for d in self.depths):
            problems.append(f"depths must be 4 positive ints, got {self.depths}")
        s = self.downsample
        if s < 8 or (s & (s - 1)) != 0:
            problems.append(f"downsample must be a power of two >= 8, got {s}")
        if len(self.widths) == 4 and self.widths[3] % max(self.attention_heads, 1) != 0:
            problems.append(
                f"stage-4 width {self.widths[3]} not divisible by attention_heads {self.attention_heads}")
        if self.embed_dim <= 0:
            problems.append(f"embed_dim must be positive, got {self.embed_dim}")
        if problems:
            raise ConfigError(problems)

    @classmethod
    def from_preset(cls, name: str) -> "EncoderConfig":
        presets = _load_presets()
        if name not in presets:
            raise ConfigError([f"unknown preset {name!r}; known: {sorted(presets)}"])
        p = presets[name]
        return cls(
            widths=tuple(p["widths"]),
            depths=tuple(p["depths"]),
            downsample=p["downsample"],
            attention_heads=p["attention_heads"],
            embed_dim=p["embed_dim"],
            preset=name,
        )


@dataclass
class FeatureEmbedding:
    """Spatial feature grid (B, C, h, w) tagged with which branch made it."""

    grid: torch.Tensor
    source: str = "rgb"

    def __post_init__(self):
        if self.source not in EMBED_SOURCES:
            raise ContractViolation(f"unknown embedding source {self.source!r}")
        if not torch.isfinite(self.grid).all():
            raise ContractViolation("embedding contains non-finite values")


class Encoder(nn.Module):
    def __init__(self, config: EncoderConfig):
        super().__init__()
        config.validate()
        self.config = config
        c1, c2, c3, c4 = config.widths
        n1, n2, n3, n4 = config.depths
        stem_stride = config.downsample // 8

        self.stem = ConvNormAct(3, c1, 3, stride=stem_stride)
        self.stage1 = nn.Sequential(*[DSConv(c1) for _ in range(n1)])
        self.down1 = ConvNormAct(c1, c2, 3, stride=2)
        self.stage2 = nn.Sequential(*[FusedMBConv(c2) for _ in range(n2)])
        self.down2 = ConvNormAct(c2, c3, 3, stride=2)
        self.stage3 = nn.Sequential(*[MBConv(c3) for _ in range(n3)])
        self.down3 = ConvNormAct(c3, c4, 3, stride=2)
        self.stage4 = nn.Sequential(
            *[AttentionBlock(c4, config.attention_heads) for _ in range(n4)])
        self.neck = ConvNormAct(c4, config.embed_dim, 1, act=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.stage1(self.stem(x))
        x = self.stage2(self.down1(x))
        x = self.stage3(self.down2(x))
        x = self.stage4(self.down3(x))
        return self.neck(x)


def build_encoder(config: EncoderConfig, seed: int) -> Encoder:
    """Construct an encoder with parameter init fully determined by seed."""
    config.validate()
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        encoder = Encoder(config)
    return encoder


def encode(encoder: Encoder, x: torch.Tensor, source: str = "rgb") -> FeatureEmbedding:
    """Run the encoder over (B, 3, H, W) input; H and W must divide by s."""
    if x.ndim != 4 or x.shape[1] != 3:
        raise ContractViolation(f"expected (B, 3, H, W) input, got {tuple(x.shape)}")
    s = encoder.config.downsample
    if x.shape[2] % s or x.shape[3] % s:
        raise ContractViolation(
            f"input {tuple(x.shape[2:])} not divisible by downsample factor {s}")
    return FeatureEmbedding(grid=encoder(x), source=source)
