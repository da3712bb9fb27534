from __future__ import annotations

import numpy as np

from depthseg.data.depth import prepare_depth
from depthseg.data.types import DepthMap


def test_min_max_normalization():
    values = np.array([[2.0, 4.0], [6.0, 10.0]], dtype=np.float32)
    prepared, degenerate = prepare_depth(DepthMap(values=values))
    assert not degenerate
    assert prepared.shape == (2, 2, 3)
    expected = (values - 2.0) / 8.0
    for c in range(3):
        assert np.allclose(prepared[:, :, c], expected)


def test_scale_invariance():
    rng = np.random.default_rng(3)
    values = rng.uniform(1.0, 5.0, size=(8, 8)).astype(np.float32)
    a, _ = prepare_depth(DepthMap(values=values))
    b, _ = prepare_depth(DepthMap(values=values * 7.0))
    assert np.allclose(a, b, atol=1e-6)


def test_constant_map_is_degenerate():
    prepared, degenerate = prepare_depth(DepthMap(values=np.full((4, 4), 3.0, np.float32)))
    assert degenerate
    assert not prepared.any()


def test_output_range():
    rng = np.random.default_rng(5)
    values = rng.uniform(0.0, 100.0, size=(16, 16)).astype(np.float32)
    prepared, _ = prepare_depth(DepthMap(values=values))
    assert prepared.min() == 0.0 and prepared.max() == 1.0
