from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from depthseg.data.types import (
    DepthMap,
    EmptyMask,
    InstanceMask,
    RgbImage,
    SyntheticSceneConfig,
    mask_bitmap,
    tight_bbox,
)
from depthseg.errors import ConfigError, ContractViolation


def _square_mask(h=16, w=16, y0=2, y1=6, x0=3, x1=9):
    m = np.zeros((h, w), dtype=bool)
    m[y0:y1, x0:x1] = True
    return m


def test_tight_bbox_is_half_open():
    assert tight_bbox(_square_mask()) == (3, 2, 9, 6)


def test_instance_mask_derives_area_and_bbox():
    m = InstanceMask(bitmap=_square_mask())
    assert m.area == 24
    assert m.bbox == (3, 2, 9, 6)


def test_instance_mask_rejects_empty():
    with pytest.raises(ContractViolation):
        InstanceMask(bitmap=np.zeros((8, 8), dtype=bool))


def test_instance_mask_rejects_inconsistent_area():
    with pytest.raises(ContractViolation):
        InstanceMask(bitmap=_square_mask(), area=5)


def test_mask_bitmap_empty_mask():
    assert mask_bitmap(EmptyMask(4, 6)).shape == (4, 6)
    assert not mask_bitmap(EmptyMask(4, 6)).any()


def test_rgb_image_range_contract():
    with pytest.raises(ContractViolation):
        RgbImage(pixels=np.full((16, 16, 3), 1.5, dtype=np.float32))


def test_rgb_image_minimum_size():
    with pytest.raises(ContractViolation):
        RgbImage(pixels=np.zeros((8, 8, 3), dtype=np.float32))


def test_depth_map_rejects_negative():
    with pytest.raises(ContractViolation):
        DepthMap(values=np.full((16, 16), -1.0, dtype=np.float32))


def test_depth_map_rejects_nan():
    bad = np.zeros((16, 16), dtype=np.float32)
    bad[0, 0] = np.nan
    with pytest.raises(ContractViolation):
        DepthMap(values=bad)


def test_scene_config_collects_every_violation():
    cfg = SyntheticSceneConfig(height=8, min_objects=0, occlusion_probability=2.0,
                               size_range=(2, 200))
    with pytest.raises(ConfigError) as err:
        cfg.validate()
    text = str(err.value)
    for fragment in ("16x16", "min_objects", "occlusion_probability", "size"):
        assert fragment in text


def test_scene_config_default_is_valid():
    SyntheticSceneConfig().validate()
