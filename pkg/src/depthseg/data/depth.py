"""Depth preprocessing for the depth encoder branch."""

from __future__ import annotations

import numpy as np

from .types import DepthMap


def prepare_depth(depth: DepthMap) -> tuple[np.ndarray, bool]:
    """Min-max normalize a depth map and replicate to three channels.

    Relative-depth estimators are scale-free, so values are mapped to
    [0, 1] via (d - min) / (max - min) before replication. A constant map
    has no usable range; it is returned as all zeros with the degenerate
    flag set instead of raising.

    Returns (H, W, 3) float32 array and the degenerate flag.
    """
    values = depth.values
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        return np.zeros((*values.shape, 3), dtype=np.float32), True
    normalized = (values - lo) / (hi - lo)
    return np.repeat(normalized[:, :, None], 3, axis=2).astype(np.float32), False
