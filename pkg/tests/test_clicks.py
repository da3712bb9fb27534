from __future__ import annotations

import numpy as np
import pytest

from depthseg.data.types import EmptyMask, InstanceMask
from depthseg.errors import ContractViolation
from depthseg.evaluation.clicks import (
    ClickProtocolConfig,
    interior_point,
    simulate_clicks,
)
from depthseg.models.prompts import BACKGROUND, FOREGROUND


def _mask(arr):
    return InstanceMask(bitmap=np.asarray(arr, dtype=bool))


def _brute_interior(region: np.ndarray) -> tuple[int, int]:
    """Chebyshev distance to the region's complement, computed per pixel.

    Scanning in (y, x) order with a strict > keeps the first maximum, i.e.
    the smallest (y, x) on ties.
    """
    region = region.astype(bool)
    h, w = region.shape
    if region.all():
        return (0, 0)
    bg = np.argwhere(~region)
    best, best_yx = -1, None
    for y in range(h):
        for x in range(w):
            if not region[y, x]:
                continue
            d = int(np.maximum(np.abs(bg[:, 0] - y), np.abs(bg[:, 1] - x)).min())
            if d > best:
                best, best_yx = d, (y, x)
    return (best_yx[1], best_yx[0])


def test_interior_point_center_of_square():
    region = np.zeros((5, 5), dtype=bool)
    region[:, :] = True
    region[0, :] = region[-1, :] = region[:, 0] = region[:, -1] = False
    region[2, 2] = True  # 3x3 block center (2,2)
    assert interior_point(region) == (2, 2)


def test_interior_point_full_region_origin():
    assert interior_point(np.ones((4, 4), dtype=bool)) == (0, 0)


def test_interior_point_tie_breaks_to_smallest_yx():
    region = np.zeros((3, 7), dtype=bool)
    region[1, 1] = region[1, 5] = True  # two isolated pixels, same depth
    assert interior_point(region) == (1, 1)


def test_interior_point_matches_brute_force():
    rng = np.random.default_rng(23)
    for _ in range(10):
        region = rng.random((7, 9)) < 0.6
        if not region.any():
            continue
        got = interior_point(region)
        want = _brute_interior(region)
        # equal depth is what matters; the exact argmax pixel must agree too
        assert got == want


def test_interior_point_rejects_empty():
    with pytest.raises(ContractViolation):
        interior_point(np.zeros((4, 4), dtype=bool))


def test_first_click_is_gt_interior_foreground():
    gt = np.zeros((7, 7), dtype=bool)
    gt[2:5, 2:5] = True
    click = simulate_clicks(_mask(gt), None, 0)
    assert click == (3, 3, FOREGROUND)


def test_refinement_targets_largest_error():
    gt = np.zeros((8, 8), dtype=bool)
    gt[0:4, 0:4] = True
    pred = np.zeros((8, 8), dtype=bool)
    pred[0:4, 0:2] = True        # missing right half of gt (8 px, FN)
    pred[6:8, 6:8] = True        # hallucinated corner (4 px, FP)
    x, y, label = simulate_clicks(_mask(gt), _mask(pred), 1)
    assert label == FOREGROUND
    assert gt[y, x] and not pred[y, x]


def test_refinement_clicks_background_on_dominant_false_positive():
    gt = np.zeros((8, 8), dtype=bool)
    gt[0, 0] = True
    pred = np.zeros((8, 8), dtype=bool)
    pred[0, 0] = True
    pred[3:8, 3:8] = True        # large hallucination
    x, y, label = simulate_clicks(_mask(gt), _mask(pred), 1)
    assert label == BACKGROUND
    assert pred[y, x] and not gt[y, x]


def test_missed_region_wins_size_tie():
    gt = np.zeros((6, 6), dtype=bool)
    gt[0:2, 0:2] = True
    pred = np.zeros((6, 6), dtype=bool)
    pred[4:6, 4:6] = True        # FN and FP both 4 px
    _, _, label = simulate_clicks(_mask(gt), _mask(pred), 1)
    assert label == FOREGROUND


def test_exact_prediction_yields_none():
    gt = np.zeros((6, 6), dtype=bool)
    gt[1:4, 1:4] = True
    assert simulate_clicks(_mask(gt), _mask(gt), 2) is None


def test_none_prediction_treated_as_empty():
    gt = np.zeros((6, 6), dtype=bool)
    gt[1:4, 1:4] = True
    click_on_none = simulate_clicks(_mask(gt), None, 1)
    click_on_empty = simulate_clicks(_mask(gt), EmptyMask(6, 6), 1)
    assert click_on_none == click_on_empty == (2, 2, FOREGROUND)


def test_simulation_is_deterministic():
    rng = np.random.default_rng(5)
    gt = InstanceMask(bitmap=(rng.random((10, 10)) < 0.4) | np.eye(10, dtype=bool))
    pred = _mask(rng.random((10, 10)) < 0.3)
    a = [simulate_clicks(gt, pred, n) for n in range(4)]
    b = [simulate_clicks(gt, pred, n) for n in range(4)]
    assert a == b


def test_protocol_config_validation():
    ClickProtocolConfig(click_counts=(1, 3, 5)).validate()
    with pytest.raises(ContractViolation):
        ClickProtocolConfig(click_counts=(3, 1)).validate()
    with pytest.raises(ContractViolation):
        ClickProtocolConfig(click_counts=()).validate()
