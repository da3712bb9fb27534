"""Deterministic click simulation for interactive evaluation.

No randomness anywhere: ties always break toward the smallest (y, x)
pixel, so a click sequence is a pure function of (gt, predictions).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..data.types import EmptyMask, InstanceMask, mask_bitmap
from ..errors import ContractViolation
from ..models.prompts import BACKGROUND, FOREGROUND

_CONN8 = np.ones((3, 3), dtype=bool)


@dataclass
class ClickProtocolConfig:
    click_counts: tuple[int, ...] = (1, 3, 5)
    seed: int = 0

    def validate(self) -> None:
        cc = self.click_counts
        if not cc or any(c < 1 for c in cc) or list(cc) != sorted(set(cc)):
            raise ContractViolation(
                f"click_counts must be strictly increasing positive ints, got {cc}")


def interior_point(region: np.ndarray) -> tuple[int, int]:
    """(x, y) of the pixel deepest inside `region` by Chebyshev distance.

    Distance is measured to the in-canvas complement of the region; ties
    break to the smallest (y, x).
    """
    region = region.astype(bool)
    if not region.any():
        raise ContractViolation("interior_point on an empty region")
    if region.all():
        return (0, 0)
    dist = ndimage.distance_transform_cdt(region, metric="chessboard")
    y, x = np.unravel_index(int(np.argmax(dist)), region.shape)
    return (int(x), int(y))


def _largest_component(error: np.ndarray) -> np.ndarray | None:
    labels, n = ndimage.label(error, structure=_CONN8)
    if n == 0:
        return None
    sizes = np.bincount(labels.ravel())[1:]
    best = int(np.argmax(sizes)) + 1  # first max -> earliest raster-order comp
    return labels == best


def simulate_clicks(gt: InstanceMask, current_pred, n_so_far: int):
    """Next click as (x, y, label), or None when the prediction is exact.

    First click: interior-most foreground pixel of gt. Later clicks:
    interior-most pixel of the largest connected error component —
    foreground for missed regions, background for hallucinated ones;
    missed regions win size ties.
    """
    gt_bm = mask_bitmap(gt)
    if not gt_bm.any():
        raise ContractViolation("click simulation requires a non-empty gt mask")
    if n_so_far == 0:
        x, y = interior_point(gt_bm)
        return (x, y, FOREGROUND)

    pred_bm = (np.zeros_like(gt_bm) if current_pred is None
               else mask_bitmap(current_pred))
    false_neg = gt_bm & ~pred_bm
    false_pos = pred_bm & ~gt_bm
    fn_comp = _largest_component(false_neg)
    fp_comp = _largest_component(false_pos)
    if fn_comp is None and fp_comp is None:
        return None
    if fp_comp is None or (fn_comp is not None and fn_comp.sum() >= fp_comp.sum()):
        x, y = interior_point(fn_comp)
        return (x, y, FOREGROUND)
    x, y = interior_point(fp_comp)
    return (x, y, BACKGROUND)
