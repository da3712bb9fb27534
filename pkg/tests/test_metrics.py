from __future__ import annotations

import numpy as np
import pytest

from depthseg.data.types import EmptyMask, InstanceMask
from depthseg.errors import ContractViolation
from depthseg.evaluation.metrics import (
    MAP_THRESHOLDS,
    Detection,
    GroundTruthInstance,
    assign_buckets,
    average_precision,
    compute_iou,
    mean_average_precision,
    size_bucket,
)


def _mask(h, w, ys, xs):
    m = np.zeros((h, w), dtype=bool)
    m[ys, xs] = True
    return InstanceMask(bitmap=m)


def _rect(h, w, y0, y1, x0, x1):
    m = np.zeros((h, w), dtype=bool)
    m[y0:y1, x0:x1] = True
    return InstanceMask(bitmap=m)


def test_iou_hand_value():
    a = _rect(8, 8, 0, 4, 0, 4)   # 16 px
    b = _rect(8, 8, 2, 6, 0, 4)   # 16 px, overlap 8
    assert compute_iou(a, b) == pytest.approx(8 / 24)


def test_iou_empty_conventions():
    assert compute_iou(EmptyMask(4, 4), EmptyMask(4, 4)) == 1.0
    assert compute_iou(EmptyMask(4, 4), _rect(4, 4, 0, 2, 0, 2)) == 0.0


def test_iou_shape_mismatch():
    with pytest.raises(ContractViolation):
        compute_iou(EmptyMask(4, 4), EmptyMask(4, 5))


def test_bucket_boundaries():
    assert size_bucket(1023) == "S"
    assert size_bucket(1024) == "M"
    assert size_bucket(9215) == "M"
    assert size_bucket(9216) == "L"


def test_ap_hand_example():
    # 2 gts; detections: hit, miss, hit -> AP = 0.5*1 + 0.5*(2/3)
    gts = [GroundTruthInstance("img", _rect(16, 16, 0, 4, 0, 4)),
           GroundTruthInstance("img", _rect(16, 16, 8, 12, 8, 12))]
    dets = [Detection("img", _rect(16, 16, 0, 4, 0, 4), 0.9),
            Detection("img", _rect(16, 16, 12, 16, 0, 4), 0.8),
            Detection("img", _rect(16, 16, 8, 12, 8, 12), 0.7)]
    assert average_precision(dets, gts, 0.5) == pytest.approx(0.5 + 0.5 * 2 / 3)


def test_ap_no_gts_is_zero():
    assert average_precision([], [], 0.5) == 0.0


def test_perfect_detections_score_one():
    gts = [GroundTruthInstance("a", _rect(16, 16, 0, 4, 0, 4)),
           GroundTruthInstance("b", _rect(16, 16, 2, 9, 2, 9))]
    dets = [Detection(g.image_id, g.mask, 1.0) for g in gts]
    for t in MAP_THRESHOLDS:
        assert average_precision(dets, gts, t) == 1.0
    assert mean_average_precision(dets, gts) == 1.0


def test_assign_buckets_uses_best_overlap():
    small = _rect(64, 64, 0, 8, 0, 8)          # 64 px  -> S
    large = _rect(64, 64, 16, 64, 16, 64)      # 2304 px -> M
    gts = [GroundTruthInstance("x", small), GroundTruthInstance("x", large)]
    near_small = Detection("x", _rect(64, 64, 0, 8, 0, 9), 0.9)
    nowhere = Detection("x", _rect(64, 64, 9, 12, 9, 12), 0.8)
    got = assign_buckets([near_small, nowhere], gts)
    assert got == ["S", None]


def test_unmatched_detections_penalize_every_bucket():
    gts = [GroundTruthInstance("x", _rect(64, 64, 0, 8, 0, 8))]
    hit = Detection("x", gts[0].mask, 0.9)
    stray = Detection("x", _rect(64, 64, 30, 40, 30, 40), 0.95)
    clean = mean_average_precision([hit], gts, bucket="S")
    noisy = mean_average_precision([hit, stray], gts, bucket="S")
    assert noisy < clean


def test_map_empty_bucket_is_nan():
    gts = [GroundTruthInstance("x", _rect(64, 64, 0, 8, 0, 8))]
    assert np.isnan(mean_average_precision([], gts, bucket="L"))


# -- brute-force cross-check ------------------------------------------------

def _reference_ap(dets, gts, threshold):
    """Slow AP: explicit greedy matching + envelope integration by scan."""
    if not gts:
        return 0.0
    remaining = {j for j in range(len(gts))}
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    tp_flags = []
    for i in order:
        d = dets[i]
        best = (-1.0, None)
        for j in sorted(remaining):
            g = gts[j]
            if g.image_id != d.image_id:
                continue
            bm_d, bm_g = np.asarray(d.mask.bitmap if hasattr(d.mask, "bitmap")
                                    else np.zeros(g.mask.bitmap.shape, bool)), g.mask.bitmap
            union = np.logical_or(bm_d, bm_g).sum()
            iou = float(np.logical_and(bm_d, bm_g).sum() / union) if union else 1.0
            if iou > best[0]:
                best = (iou, j)
        if best[1] is not None and best[0] >= threshold and best[0] > 0.0:
            remaining.discard(best[1])
            tp_flags.append(True)
        else:
            tp_flags.append(False)
    ap = 0.0
    n_tp = 0
    prev_recall = 0.0
    for k, flag in enumerate(tp_flags):
        if flag:
            n_tp += 1
        recall = n_tp / len(gts)
        if recall > prev_recall:
            # precision envelope from this rank onward
            best_prec = 0.0
            m_tp = 0
            for kk, f2 in enumerate(tp_flags):
                if f2:
                    m_tp += 1
                if kk >= k:
                    best_prec = max(best_prec, m_tp / (kk + 1))
            ap += (recall - prev_recall) * best_prec
            prev_recall = recall
    return ap


def _random_corpus(rng, n_images=2, max_gt=4):
    gts, dets = [], []
    for i in range(n_images):
        img = f"img{i}"
        for _ in range(int(rng.integers(1, max_gt + 1))):
            y, x = rng.integers(0, 10, size=2)
            h, w = rng.integers(2, 7, size=2)
            gts.append(GroundTruthInstance(img, _rect(16, 16, y, y + h, x, x + w)))
        for _ in range(int(rng.integers(0, max_gt + 2))):
            y, x = rng.integers(0, 10, size=2)
            h, w = rng.integers(2, 7, size=2)
            dets.append(Detection(img, _rect(16, 16, y, y + h, x, x + w),
                                  float(rng.random())))
    return dets, gts


def test_ap_agrees_with_reference_on_random_corpora():
    rng = np.random.default_rng(31)
    for _ in range(12):
        dets, gts = _random_corpus(rng)
        for t in (0.5, 0.75):
            assert average_precision(dets, gts, t) == pytest.approx(
                _reference_ap(dets, gts, t), abs=1e-12)
