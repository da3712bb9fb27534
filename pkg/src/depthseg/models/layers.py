"""Building blocks for the four-stage encoder.

GroupNorm is used throughout instead of BatchNorm so that outputs never
depend on batch composition and eval/train behavior match exactly.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F


def make_norm(channels: int) -> nn.GroupNorm:
    return nn.GroupNorm(math.gcd(8, channels), channels)


class ConvNormAct(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int = 3, stride: int = 1,
                 groups: int = 1, norm: bool = True, act: bool = True, bias: bool | None = None):
        super().__init__()
        if bias is None:
            bias = not norm
        self.conv = nn.Conv2d(in_ch, out_ch, kernel, stride,
                              padding=kernel // 2, groups=groups, bias=bias)
        self.norm = make_norm(out_ch) if norm else nn.Identity()
        self.act = nn.Hardswish() if act else nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.act(self.norm(self.conv(x)))


class DSConv(nn.Module):
    """Depthwise 3x3 + pointwise 1x1 with residual; the stage-1 block."""

    def __init__(self, channels: int):
        super().__init__()
        self.depthwise = ConvNormAct(channels, channels, 3, groups=channels)
        self.pointwise = ConvNormAct(channels, channels, 1, act=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.pointwise(self.depthwise(x))


class FusedMBConv(nn.Module):
    """Fused inverted bottleneck: 3x3 expand conv + 1x1 project, residual."""

    def __init__(self, channels: int, expand: int = 2):
        super().__init__()
        mid = channels * expand
        self.expand = ConvNormAct(channels, mid, 3)
        self.project = ConvNormAct(mid, channels, 1, act=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.project(self.expand(x))


class MBConv(nn.Module):
    """Inverted bottleneck: 1x1 expand, depthwise 3x3, 1x1 project, residual."""

    def __init__(self, channels: int, expand: int = 4):
        super().__init__()
        mid = channels * expand
        self.expand = ConvNormAct(channels, mid, 1)
        self.depthwise = ConvNormAct(mid, mid, 3, groups=mid)
        self.project = ConvNormAct(mid, channels, 1, act=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.project(self.depthwise(self.expand(x)))


class LiteMLA(nn.Module):
    """Multi-head linear attention with a ReLU kernel.

    Softmax attention is O(N^2) in the number of grid cells; the ReLU
    kernel trick computes q @ (k^T v) instead, which is linear in N.
    """

    def __init__(self, channels: int, heads: int):
        super().__init__()
        if channels % heads != 0:
            raise ValueError(f"channels {channels} not divisible by heads {heads}")
        self.heads = heads
        self.head_dim = channels // heads
        self.qkv = nn.Conv2d(channels, channels * 3, 1, bias=False)
        self.proj = ConvNormAct(channels, channels, 1, act=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, c, h, w = x.shape
        qkv = self.qkv(x).reshape(b, 3, self.heads, self.head_dim, h * w)
        q, k, v = F.relu(qkv[:, 0]), F.relu(qkv[:, 1]), qkv[:, 2]
        # (b, heads, d, N): context = k @ v^T summed over tokens
        context = torch.matmul(k, v.transpose(-1, -2))          # (b, hd, d, d)
        out = torch.matmul(context.transpose(-1, -2), q)        # (b, hd, d, N)
        denom = torch.matmul(k.sum(dim=-1, keepdim=True).transpose(-1, -2), q)
        out = out / (denom + 1e-6)
        out = out.reshape(b, c, h, w)
        return x + self.proj(out)


class AttentionBlock(nn.Module):
    """Stage-4 block: linear attention for context + MBConv for locality."""

    def __init__(self, channels: int, heads: int, local_expand: int = 2):
        super().__init__()
        self.context = LiteMLA(channels, heads)
        self.local = MBConv(channels, expand=local_expand)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.local(self.context(x))
