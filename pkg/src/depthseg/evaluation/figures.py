"""Side-by-side qualitative comparison figures."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from ..data.types import DatasetRecord, mask_bitmap
from ..errors import ContractViolation

OVERLAY_COLOR = np.array([255, 64, 64], dtype=np.float64)
OVERLAY_ALPHA = 0.5


def overlay_mask(rgb_uint8: np.ndarray, bitmap: np.ndarray) -> np.ndarray:
    """Alpha-blend the overlay color at 50% over mask pixels."""
    out = rgb_uint8.astype(np.float64)
    out[bitmap] = (1.0 - OVERLAY_ALPHA) * out[bitmap] + OVERLAY_ALPHA * OVERLAY_COLOR
    return np.round(out).astype(np.uint8)


def _depth_panel(depth_values: np.ndarray) -> np.ndarray:
    lo, hi = float(depth_values.min()), float(depth_values.max())
    norm = np.zeros_like(depth_values, dtype=np.float64) if hi == lo \
        else (depth_values - lo) / (hi - lo)
    gray = np.round(norm * 255.0).astype(np.uint8)
    return np.stack([gray, gray, gray], axis=-1)


def emit_comparison_figure(record: DatasetRecord, predictions: dict,
                           out_path: Path) -> Path:
    """Writes [input | depth | one overlay per variant] as a single PNG.

    Variants are laid out in sorted name order so output bytes are a pure
    function of the inputs.
    """
    if not predictions:
        raise ContractViolation("need at least one prediction to draw")
    rgb = np.round(record.image.pixels * 255.0).astype(np.uint8)
    panels = [rgb, _depth_panel(record.depth.values)]
    for name in sorted(predictions):
        panels.append(overlay_mask(rgb, mask_bitmap(predictions[name])))
    figure = np.concatenate(panels, axis=1)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(figure, mode="RGB").save(out_path)
    return out_path
