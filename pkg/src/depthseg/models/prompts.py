"""Sparse prompt handling: points and boxes to embedding tokens."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn

from ..errors import ContractViolation

FOREGROUND = 1
BACKGROUND = 0

# Label-embedding table rows.
_BG_POINT, _FG_POINT, _BOX_MIN, _BOX_MAX = 0, 1, 2, 3


@dataclass
class PromptSet:
    """User prompts in pixel coordinates.

    points: (x, y, label) with label 1=foreground, 0=background.
    boxes: (x_min, y_min, x_max, y_max), half-open like array slices.
    """

    points: list[tuple[float, float, int]] = field(default_factory=list)
    boxes: list[tuple[float, float, float, float]] = field(default_factory=list)

    def __post_init__(self):
        self.points = [(float(x), float(y), int(lb)) for x, y, lb in self.points]
        self.boxes = [tuple(float(v) for v in b) for b in self.boxes]
        if not self.points and not self.boxes:
            raise ContractViolation("prompt set must contain at least one point or box")
        for x, y, lb in self.points:
            if lb not in (FOREGROUND, BACKGROUND):
                raise ContractViolation(f"point label must be 0 or 1, got {lb}")
        for x0, y0, x1, y1 in self.boxes:
            if not (x0 < x1 and y0 < y1):
                raise ContractViolation(f"degenerate box {(x0, y0, x1, y1)}")

    def validate_bounds(self, height: int, width: int) -> None:
        for x, y, _ in self.points:
            if not (0 <= x <= width - 1 and 0 <= y <= height - 1):
                raise ContractViolation(
                    f"point ({x}, {y}) outside {height}x{width} image")
        for x0, y0, x1, y1 in self.boxes:
            if not (0 <= x0 and x1 <= width and 0 <= y0 and y1 <= height):
                raise ContractViolation(
                    f"box {(x0, y0, x1, y1)} outside {height}x{width} image")

    def canonical(self) -> "PromptSet":
        """Sort prompts into a fixed order.

        Tokens then come out identically for any input ordering, which
        makes decoding bitwise permutation-invariant.
        """
        return PromptSet(
            points=sorted(self.points, key=lambda p: (p[2], p[1], p[0])),
            boxes=sorted(self.boxes),
        )

    @property
    def num_tokens(self) -> int:
        return len(self.points) + 2 * len(self.boxes)


class PromptEncoder(nn.Module):
    """Points/boxes to tokens via random Fourier features + type embeddings."""

    def __init__(self, embed_dim: int):
        super().__init__()
        if embed_dim % 2 != 0:
            raise ContractViolation(f"embed_dim must be even, got {embed_dim}")
        self.embed_dim = embed_dim
        self.register_buffer(
            "fourier", torch.randn(2, embed_dim // 2), persistent=True)
        self.type_embed = nn.Embedding(4, embed_dim)

    def _position_encoding(self, coords: torch.Tensor) -> torch.Tensor:
        # coords in [0, 1]^2, any leading shape
        projected = (2.0 * coords - 1.0) @ self.fourier
        projected = 2.0 * np.pi * projected
        return torch.cat([torch.sin(projected), torch.cos(projected)], dim=-1)

    def forward(self, prompts: PromptSet, image_size: tuple[int, int]) -> torch.Tensor:
        """Returns (T, embed_dim) tokens, one per point, two per box."""
        h, w = image_size
        prompts = prompts.canonical()
        coords = []
        type_ids = []
        for x, y, label in prompts.points:
            coords.append(((x + 0.5) / w, (y + 0.5) / h))
            type_ids.append(_FG_POINT if label == FOREGROUND else _BG_POINT)
        for x0, y0, x1, y1 in prompts.boxes:
            coords.append(((x0 + 0.5) / w, (y0 + 0.5) / h))
            type_ids.append(_BOX_MIN)
            coords.append(((x1 - 0.5) / w, (y1 - 0.5) / h))
            type_ids.append(_BOX_MAX)
        device = self.fourier.device
        coord_t = torch.tensor(coords, dtype=torch.float32, device=device)
        pe = self._position_encoding(coord_t)
        return pe + self.type_embed(torch.tensor(type_ids, device=device))

    def dense_encoding(self, grid_size: tuple[int, int]) -> torch.Tensor:
        """Per-cell positional encoding (embed_dim, h, w) for the decoder."""
        h, w = grid_size
        device = self.fourier.device
        ys = (torch.arange(h, dtype=torch.float32, device=device) + 0.5) / h
        xs = (torch.arange(w, dtype=torch.float32, device=device) + 0.5) / w
        gy, gx = torch.meshgrid(ys, xs, indexing="ij")
        pe = self._position_encoding(torch.stack([gx, gy], dim=-1))
        return pe.permute(2, 0, 1)


def encode_prompts(encoder: PromptEncoder, prompts: PromptSet,
                   image_size: tuple[int, int]) -> torch.Tensor:
    prompts.validate_bounds(*image_size)
    return encoder(prompts, image_size)
