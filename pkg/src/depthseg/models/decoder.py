"""Mask decoder: two-way attention between prompt tokens and the image grid.

Follows the segment-anything head layout — learned IoU + mask output
tokens prepended to the prompt tokens, a small two-way transformer, an
upscaling path whose output is dotted with a hypernetwork projection of
the mask token — but sized down and with a single mask output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ContractViolation
from ..data.types import EmptyMask, InstanceMask
from .layers import make_norm


class Attention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads != 0:
            raise ContractViolation(f"dim {dim} not divisible by heads {heads}")
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        b, n, d = x.shape
        return x.reshape(b, n, self.heads, d // self.heads).transpose(1, 2)

    def forward(self, q: torch.Tensor, k: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
        b, n, d = q.shape
        qh, kh, vh = self._split(self.q_proj(q)), self._split(self.k_proj(k)), self._split(self.v_proj(v))
        attn = torch.softmax(qh @ kh.transpose(-1, -2) * self.scale, dim=-1)
        out = (attn @ vh).transpose(1, 2).reshape(b, n, d)
        return self.out_proj(out)


class MLP(nn.Module):
    def __init__(self, dims: list[int], sigmoid_output: bool = False):
        super().__init__()
        self.layers = nn.ModuleList(
            nn.Linear(a, b) for a, b in zip(dims[:-1], dims[1:]))
        self.sigmoid_output = sigmoid_output

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = F.relu(x)
        return torch.sigmoid(x) if self.sigmoid_output else x


class TwoWayBlock(nn.Module):
    """Token self-attention, token->image, MLP, image->token."""

    def __init__(self, dim: int, heads: int, mlp_ratio: int = 2,
                 skip_first_pe: bool = False):
        super().__init__()
        self.skip_first_pe = skip_first_pe
        self.self_attn = Attention(dim, heads)
        self.norm1 = nn.LayerNorm(dim)
        self.cross_t2i = Attention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, dim * mlp_ratio), nn.ReLU(), nn.Linear(dim * mlp_ratio, dim))
        self.norm3 = nn.LayerNorm(dim)
        self.cross_i2t = Attention(dim, heads)
        self.norm4 = nn.LayerNorm(dim)

    def forward(self, tokens, image, token_pe, image_pe):
        if self.skip_first_pe:
            tokens = self.norm1(tokens + self.self_attn(tokens, tokens, tokens))
        else:
            q = tokens + token_pe
            tokens = self.norm1(tokens + self.self_attn(q, q, tokens))
        q = tokens + token_pe
        k = image + image_pe
        tokens = self.norm2(tokens + self.cross_t2i(q, k, image))
        tokens = self.norm3(tokens + self.mlp(tokens))
        q = tokens + token_pe
        image = self.norm4(image + self.cross_i2t(k, q, tokens))
        return tokens, image


@dataclass
class MaskPrediction:
    """Decoder output for one prompt set on one image."""

    logits: torch.Tensor                 # (H, W)
    predicted_iou: float                 # in [0, 1]
    direct_logits: list[torch.Tensor]    # low-resolution intermediate maps

    def __post_init__(self):
        if not torch.isfinite(self.logits).all():
            raise ContractViolation("mask logits contain non-finite values")
        if not (0.0 <= self.predicted_iou <= 1.0):
            raise ContractViolation(f"predicted_iou {self.predicted_iou} outside [0,1]")


class MaskDecoder(nn.Module):
    def __init__(self, embed_dim: int, num_layers: int = 2, heads: int = 4):
        super().__init__()
        self.embed_dim = embed_dim
        self.iou_token = nn.Embedding(1, embed_dim)
        self.mask_token = nn.Embedding(1, embed_dim)
        self.layers = nn.ModuleList(
            TwoWayBlock(embed_dim, heads, skip_first_pe=(i == 0))
            for i in range(num_layers))
        self.final_t2i = Attention(embed_dim, heads)
        self.final_norm = nn.LayerNorm(embed_dim)

        up_mid, up_out = embed_dim // 4, embed_dim // 8
        self.upscale = nn.Sequential(
            nn.ConvTranspose2d(embed_dim, up_mid, 2, stride=2),
            make_norm(up_mid), nn.GELU(),
            nn.ConvTranspose2d(up_mid, up_out, 2, stride=2), nn.GELU())
        self.hyper = MLP([embed_dim, embed_dim, up_out])
        self.iou_head = MLP([embed_dim, embed_dim, embed_dim, 1], sigmoid_output=True)
        self.direct_proj = nn.Conv2d(embed_dim, 1, 1)

    def forward(self, grid: torch.Tensor, image_pe: torch.Tensor,
                prompt_tokens: torch.Tensor, output_size: tuple[int, int]):
        """Decode (B, D, h, w) grid + (B, T, D) tokens.

        Returns (logits (B, H, W), predicted_iou (B,), direct (B, h, w)).
        """
        b, d, h, w = grid.shape
        if prompt_tokens.ndim != 3 or prompt_tokens.shape[-1] != d:
            raise ContractViolation(
                f"prompt tokens shape {tuple(prompt_tokens.shape)} incompatible with dim {d}")
        direct = self.direct_proj(grid).squeeze(1)

        out_tokens = torch.cat(
            [self.iou_token.weight, self.mask_token.weight], dim=0)
        tokens = torch.cat(
            [out_tokens.unsqueeze(0).expand(b, -1, -1), prompt_tokens], dim=1)

        image = grid.flatten(2).transpose(1, 2)                    # (B, N, D)
        pe = image_pe.flatten(1).transpose(0, 1).unsqueeze(0).expand(b, -1, -1)
        token_pe = tokens  # prompt tokens double as their own positional signal

        x, img = tokens, image
        for layer in self.layers:
            x, img = layer(x, img, token_pe, pe)
        q = x + token_pe
        x = self.final_norm(x + self.final_t2i(q, img + pe, img))

        iou_pred = self.iou_head(x[:, 0]).squeeze(-1)
        mask_embed = self.hyper(x[:, 1])                           # (B, D/8)

        upscaled = self.upscale(img.transpose(1, 2).reshape(b, d, h, w))
        low = torch.einsum("bc,bchw->bhw", mask_embed, upscaled)
        logits = F.interpolate(
            low.unsqueeze(1), size=output_size, mode="bilinear", align_corners=False)
        return logits.squeeze(1), iou_pred, direct


def binarize(pred: MaskPrediction) -> InstanceMask | EmptyMask:
    bitmap = (pred.logits > 0).cpu().numpy().astype(bool)
    if not bitmap.any():
        return EmptyMask(height=bitmap.shape[0], width=bitmap.shape[1])
    return InstanceMask(bitmap=bitmap)
