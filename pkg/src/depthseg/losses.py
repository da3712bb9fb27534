"""Training objective: five loss terms and their weighted combination.

The combined objective is

    total = lam_mask * L_mask + lam_dice * L_dice
          + lam_iou * L_iou + lam_direct * L_direct + lam_aux * L_aux

and the original two-term objective (mask + dice only) is kept as a
separate entry point because stage-1 training uses it directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from scipy import ndimage

from .data.types import EmptyMask, InstanceMask
from .errors import ContractViolation

DICE_EPS = 1.0
BOUNDARY_RADIUS = 2


@dataclass
class LossWeights:
    lam_mask: float = 20.0
    lam_dice: float = 1.0
    lam_iou: float = 1.0
    lam_direct: float = 0.5
    lam_aux: float = 0.2

    def validate(self) -> None:
        bad = [k for k, v in self.__dict__.items() if v < 0]
        if bad:
            raise ContractViolation(f"negative loss weights: {bad}")


@dataclass
class LossBreakdown:
    mask: float
    dice: float
    iou: float
    direct: float
    aux: float
    total: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _gt_tensor(gt, like: torch.Tensor) -> torch.Tensor:
    if isinstance(gt, InstanceMask):
        arr = gt.bitmap
    elif isinstance(gt, EmptyMask):
        arr = np.zeros((gt.height, gt.width), dtype=bool)
    elif isinstance(gt, torch.Tensor):
        return gt.to(like.device, like.dtype)
    else:
        arr = np.asarray(gt)
    return torch.from_numpy(arr.astype(np.float32)).to(like.device, like.dtype)


def _check_shapes(logits: torch.Tensor, gt: torch.Tensor) -> None:
    if logits.shape != gt.shape:
        raise ContractViolation(
            f"logits shape {tuple(logits.shape)} != gt shape {tuple(gt.shape)}")


def mask_bce_loss(logits: torch.Tensor, gt) -> torch.Tensor:
    """Mean per-pixel binary cross entropy in the stable log-sum form."""
    target = _gt_tensor(gt, logits)
    _check_shapes(logits, target)
    return F.binary_cross_entropy_with_logits(logits, target)


def dice_loss(logits: torch.Tensor, gt) -> torch.Tensor:
    target = _gt_tensor(gt, logits)
    _check_shapes(logits, target)
    p = torch.sigmoid(logits)
    inter = (p * target).sum()
    return 1.0 - (2.0 * inter + DICE_EPS) / (p.sum() + target.sum() + DICE_EPS)


def _binary_iou(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    inter = (pred & gt).sum()
    union = (pred | gt).sum()
    if union == 0:
        return torch.ones((), dtype=torch.float32, device=pred.device)
    return inter.float() / union.float()


def iou_regression_loss(predicted_iou: torch.Tensor, logits: torch.Tensor, gt) -> torch.Tensor:
    """Squared error against the realized IoU of the thresholded mask.

    The realized IoU is a constant: no gradient flows back into the mask
    path through the target.
    """
    target = _gt_tensor(gt, logits)
    _check_shapes(logits, target)
    with torch.no_grad():
        actual = _binary_iou(logits > 0, target > 0.5)
    return (predicted_iou - actual) ** 2


def _downsample_gt(target: torch.Tensor, size: tuple[int, int]) -> torch.Tensor:
    # Max-pool: a low-res cell is foreground if any covered pixel is.
    return F.adaptive_max_pool2d(target.unsqueeze(0).unsqueeze(0), size)[0, 0]


def direct_supervision_loss(direct_logits: list[torch.Tensor], gt) -> torch.Tensor:
    if not direct_logits:
        raise ContractViolation("direct_supervision_loss needs at least one map")
    total = None
    for low in direct_logits:
        target = _gt_tensor(gt, low)
        down = _downsample_gt(target, tuple(low.shape))
        term = mask_bce_loss(low, down) + dice_loss(low, down)
        total = term if total is None else total + term
    return total / len(direct_logits)


def boundary_band(gt_bitmap: np.ndarray, radius: int = BOUNDARY_RADIUS) -> np.ndarray:
    """Pixels within Chebyshev `radius` of the mask's inner boundary.

    The inner boundary is gt minus its 3x3 erosion (border_value=1, so a
    mask touching the canvas edge has no boundary there). Empty or full
    masks produce an empty band.
    """
    gt_bitmap = gt_bitmap.astype(bool)
    if not gt_bitmap.any() or gt_bitmap.all():
        return np.zeros_like(gt_bitmap)
    struct = np.ones((3, 3), dtype=bool)
    eroded = ndimage.binary_erosion(gt_bitmap, structure=struct, border_value=1)
    boundary = gt_bitmap & ~eroded
    if not boundary.any():
        return np.zeros_like(gt_bitmap)
    return ndimage.binary_dilation(boundary, structure=struct, iterations=radius)


def boundary_aux_loss(logits: torch.Tensor, gt) -> torch.Tensor:
    target = _gt_tensor(gt, logits)
    _check_shapes(logits, target)
    band = boundary_band((target > 0.5).cpu().numpy())
    if not band.any():
        return torch.zeros((), dtype=logits.dtype, device=logits.device)
    band_t = torch.from_numpy(band).to(logits.device)
    return F.binary_cross_entropy_with_logits(logits[band_t], target[band_t])


def original_loss(logits: torch.Tensor, gt, weights: LossWeights) -> torch.Tensor:
    """The two-term mask+dice objective (stage-1 training target)."""
    return weights.lam_mask * mask_bce_loss(logits, gt) + \
        weights.lam_dice * dice_loss(logits, gt)


def total_loss(logits: torch.Tensor, gt, predicted_iou: torch.Tensor,
               direct_logits: list[torch.Tensor],
               weights: LossWeights) -> tuple[torch.Tensor, LossBreakdown]:
    """All five terms combined; returns (differentiable total, breakdown)."""
    weights.validate()
    m = mask_bce_loss(logits, gt)
    d = dice_loss(logits, gt)
    i = iou_regression_loss(predicted_iou, logits, gt)
    dr = direct_supervision_loss(direct_logits, gt)
    a = boundary_aux_loss(logits, gt)
    total = (weights.lam_mask * m + weights.lam_dice * d + weights.lam_iou * i
             + weights.lam_direct * dr + weights.lam_aux * a)
    breakdown = LossBreakdown(
        mask=float(m.detach()), dice=float(d.detach()), iou=float(i.detach()),
        direct=float(dr.detach()), aux=float(a.detach()),
        total=float(total.detach()))
    return total, breakdown


def combine_terms(mask: float, dice: float, iou: float, direct: float,
                  aux: float, weights: LossWeights) -> LossBreakdown:
    """Weighted combination of already-computed scalar terms.

    Summed with compensated accumulation so the total carries no
    left-to-right rounding drift.
    """
    weights.validate()
    total = math.fsum([
        weights.lam_mask * mask, weights.lam_dice * dice,
        weights.lam_iou * iou, weights.lam_direct * direct,
        weights.lam_aux * aux])
    return LossBreakdown(mask=mask, dice=dice, iou=iou, direct=direct,
                         aux=aux, total=total)
