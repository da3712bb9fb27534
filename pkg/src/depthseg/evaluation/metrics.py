"""Instance-segmentation metrics: IoU, size buckets, single-category mAP."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data.types import EmptyMask, InstanceMask, mask_bitmap
from ..errors import ContractViolation

SMALL_MAX_AREA = 32 * 32      # 1024
MEDIUM_MAX_AREA = 96 * 96     # 9216
BUCKETS = ("S", "M", "L")

MAP_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


def compute_iou(a, b) -> float:
    """|a & b| / |a | b|. Both empty -> 1.0; exactly one empty -> 0.0."""
    bm_a, bm_b = mask_bitmap(a), mask_bitmap(b)
    if bm_a.shape != bm_b.shape:
        raise ContractViolation(f"mask shapes differ: {bm_a.shape} vs {bm_b.shape}")
    union = np.logical_or(bm_a, bm_b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(bm_a, bm_b).sum() / union)


def size_bucket(area: int) -> str:
    if area < SMALL_MAX_AREA:
        return "S"
    if area < MEDIUM_MAX_AREA:
        return "M"
    return "L"


@dataclass
class Detection:
    """One candidate instance for mAP scoring."""

    image_id: str
    mask: InstanceMask | EmptyMask
    score: float


@dataclass
class GroundTruthInstance:
    image_id: str
    mask: InstanceMask

    @property
    def bucket(self) -> str:
        return size_bucket(self.mask.area)


def _match_detections(detections: list[Detection],
                      gts: list[GroundTruthInstance],
                      threshold: float) -> list[tuple[Detection, int]]:
    """Greedy best-IoU matching in descending score order.

    Returns (detection, matched gt index or -1) in match order. Ties in
    score break by detection list position, keeping results deterministic.
    """
    order = sorted(range(len(detections)), key=lambda i: (-detections[i].score, i))
    taken: set[int] = set()
    results = []
    for di in order:
        det = detections[di]
        best_iou, best_gi = 0.0, -1
        for gi, gt in enumerate(gts):
            if gi in taken or gt.image_id != det.image_id:
                continue
            iou = compute_iou(det.mask, gt.mask)
            if iou > best_iou:
                best_iou, best_gi = iou, gi
        if best_gi >= 0 and best_iou >= threshold:
            taken.add(best_gi)
            results.append((det, best_gi))
        else:
            results.append((det, -1))
    return results


def average_precision(detections: list[Detection],
                      gts: list[GroundTruthInstance],
                      threshold: float) -> float:
    """AP with every-point precision interpolation."""
    if not gts:
        return 0.0
    matches = _match_detections(detections, gts, threshold)
    tp = np.array([1 if gi >= 0 else 0 for _, gi in matches], dtype=np.float64)
    if tp.size == 0:
        return 0.0
    cum_tp = np.cumsum(tp)
    cum_fp = np.cumsum(1.0 - tp)
    recall = cum_tp / len(gts)
    precision = cum_tp / (cum_tp + cum_fp)
    # Monotone non-increasing precision envelope, then sum recall steps.
    for i in range(len(precision) - 2, -1, -1):
        precision[i] = max(precision[i], precision[i + 1])
    ap = 0.0
    prev_r = 0.0
    for r, p in zip(recall, precision):
        ap += (r - prev_r) * p
        prev_r = r
    return float(ap)


def assign_buckets(detections: list[Detection],
                   gts: list[GroundTruthInstance]) -> list[str | None]:
    """Bucket for each detection: the bucket of its highest-IoU gt.

    Detections overlapping no gt at all get None and count as false
    positives in every bucket.
    """
    out: list[str | None] = []
    for det in detections:
        best_iou, best = 0.0, None
        for gt in gts:
            if gt.image_id != det.image_id:
                continue
            iou = compute_iou(det.mask, gt.mask)
            if iou > best_iou:
                best_iou, best = iou, gt.bucket
        out.append(best)
    return out


def mean_average_precision(detections: list[Detection],
                           gts: list[GroundTruthInstance],
                           bucket: str | None = None) -> float:
    """mAP over thresholds .50:.05:.95, optionally restricted to one bucket."""
    if bucket is not None:
        if bucket not in BUCKETS:
            raise ContractViolation(f"unknown bucket {bucket!r}")
        buckets = assign_buckets(detections, gts)
        detections = [d for d, b in zip(detections, buckets) if b == bucket or b is None]
        gts = [g for g in gts if g.bucket == bucket]
    if not gts:
        return float("nan")
    aps = [average_precision(detections, gts, t) for t in MAP_THRESHOLDS]
    return float(np.mean(aps))
