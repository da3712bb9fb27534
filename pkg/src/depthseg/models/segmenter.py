"""Full promptable segmentation model: encoders + fusion + prompt/mask head.

Two variants share the head architecture: the RGB-only model has a single
encoder; the depth-aware model adds a second encoder with identical
architecture for the depth map and combines embeddings additively.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn

from ..data.depth import prepare_depth
from ..data.types import DepthMap, RgbImage
from ..errors import ContractViolation
from .decoder import MaskDecoder, MaskPrediction
from .encoder import Encoder, EncoderConfig, FeatureEmbedding
from .fusion import FusionParams, fuse
from .prompts import PromptEncoder, PromptSet


@dataclass
class SegmenterConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    use_depth: bool = True
    decoder_layers: int = 2
    decoder_heads: int = 4
    alpha_init: float = 0.1

    @property
    def variant(self) -> str:
        return "depth_aware" if self.use_depth else "rgb_only"

    def to_dict(self) -> dict:
        enc = self.encoder
        return {
            "encoder": {
                "widths": list(enc.widths),
                "depths": list(enc.depths),
                "downsample": enc.downsample,
                "attention_heads": enc.attention_heads,
                "embed_dim": enc.embed_dim,
                "preset": enc.preset,
            },
            "use_depth": self.use_depth,
            "decoder_layers": self.decoder_layers,
            "decoder_heads": self.decoder_heads,
            "alpha_init": self.alpha_init,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SegmenterConfig":
        enc = dict(payload["encoder"])
        enc["widths"] = tuple(enc["widths"])
        enc["depths"] = tuple(enc["depths"])
        return cls(
            encoder=EncoderConfig(**enc),
            use_depth=payload["use_depth"],
            decoder_layers=payload["decoder_layers"],
            decoder_heads=payload["decoder_heads"],
            alpha_init=payload["alpha_init"],
        )


def _to_chw(array: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(array.transpose(2, 0, 1))).float()


class Segmenter(nn.Module):
    def __init__(self, config: SegmenterConfig):
        super().__init__()
        config.encoder.validate()
        self.config = config
        dim = config.encoder.embed_dim
        self.rgb_encoder = Encoder(config.encoder)
        if config.use_depth:
            self.depth_encoder = Encoder(config.encoder)
            self.fusion = FusionParams(config.alpha_init)
            # Stage-1 counterpart of the decoder's direct projection; owned
            # by the depth branch so the shared head can stay frozen.
            self.depth_direct_head = nn.Conv2d(dim, 1, 1)
        self.prompt_encoder = PromptEncoder(dim)
        self.decoder = MaskDecoder(dim, config.decoder_layers, config.decoder_heads)

        self._cached: dict | None = None

    # ---- batch-level API used by training ----

    def embed_batch(self, images: torch.Tensor, depths: torch.Tensor | None,
                    depth_only: bool = False) -> torch.Tensor:
        """Fused (or single-branch) embedding grid (B, D, h, w)."""
        if depth_only:
            if not self.config.use_depth:
                raise ContractViolation("depth-only path requires a depth encoder")
            return self.depth_encoder(depths)
        if not self.config.use_depth:
            return self.rgb_encoder(images)
        f_rgb = FeatureEmbedding(self.rgb_encoder(images), "rgb")
        f_dep = FeatureEmbedding(self.depth_encoder(depths), "depth")
        return fuse(f_rgb, f_dep, self.fusion).grid

    def decode_batch(self, grid: torch.Tensor, tokens: torch.Tensor,
                     output_size: tuple[int, int]):
        pe = self.prompt_encoder.dense_encoding(grid.shape[-2:])
        return self.decoder(grid, pe, tokens, output_size)

    def tokenize(self, prompts: PromptSet, image_size: tuple[int, int]) -> torch.Tensor:
        return self.prompt_encoder(prompts, image_size)

    # ---- single-image predictor API used by evaluation and serving ----

    def set_image(self, image: RgbImage | np.ndarray,
                  depth: DepthMap | np.ndarray | None) -> None:
        """Encode one image (and depth map) once; predict() reuses the grid."""
        pixels = image.pixels if isinstance(image, RgbImage) else np.asarray(image)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ContractViolation(f"expected (H, W, 3) image, got {pixels.shape}")
        h, w = pixels.shape[:2]
        s = self.config.encoder.downsample
        pad_h, pad_w = -h % s, -w % s
        padded = np.pad(pixels, ((0, pad_h), (0, pad_w), (0, 0)))

        depth_used_fallback = False
        if self.config.use_depth:
            if depth is None:
                depth = DepthMap(values=np.zeros((h, w), dtype=np.float32))
                depth_used_fallback = True
            elif not isinstance(depth, DepthMap):
                depth = DepthMap(values=np.asarray(depth, dtype=np.float32))
            if depth.values.shape != (h, w):
                raise ContractViolation(
                    f"depth shape {depth.values.shape} does not match image {(h, w)}")
            prepared, _ = prepare_depth(depth)
            prepared = np.pad(prepared, ((0, pad_h), (0, pad_w), (0, 0)))
            depth_t = _to_chw(prepared).unsqueeze(0)
        else:
            depth_t = None

        was_training = self.training
        self.eval()
        with torch.no_grad():
            grid = self.embed_batch(_to_chw(padded.astype(np.float32)).unsqueeze(0), depth_t)
        if was_training:
            self.train()
        self._cached = {
            "grid": grid,
            "size": (h, w),
            "padded_size": (h + pad_h, w + pad_w),
            "depth_fallback": depth_used_fallback,
        }

    @property
    def depth_fallback_used(self) -> bool:
        return bool(self._cached and self._cached["depth_fallback"])

    def predict(self, prompts: PromptSet) -> MaskPrediction:
        if self._cached is None:
            raise ContractViolation("predict() called before set_image()")
        h, w = self._cached["size"]
        prompts.validate_bounds(h, w)
        with torch.no_grad():
            tokens = self.tokenize(prompts, self._cached["padded_size"]).unsqueeze(0)
            logits, iou, direct = self.decode_batch(
                self._cached["grid"], tokens, self._cached["padded_size"])
        return MaskPrediction(
            logits=logits[0, :h, :w],
            predicted_iou=float(iou[0]),
            direct_logits=[direct[0]],
        )

    # Canonical single-tensor forward so MAC estimation can drive the
    # whole model: the input doubles as image and (replicated) depth.
    def mac_forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        depths = x if self.config.use_depth else None
        grid = self.embed_batch(x, depths)
        prompts = PromptSet(points=[(w // 2, h // 2, 1)])
        tokens = self.tokenize(prompts, (h, w)).unsqueeze(0).expand(x.shape[0], -1, -1)
        logits, _, _ = self.decode_batch(grid, tokens, (h, w))
        return logits


def build_segmenter(config: SegmenterConfig, seed: int) -> Segmenter:
    """Construct with all parameter init determined by (config, seed)."""
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        model = Segmenter(config)
    return model
