"""Core dataset types: images, depth maps, instance masks, records."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ContractViolation

DEPTH_SOURCE_EXTERNAL = "external_estimator"
DEPTH_SOURCE_SYNTHETIC = "synthetic_ground_truth"


def tight_bbox(bitmap: np.ndarray) -> tuple[int, int, int, int]:
    """Tight (x_min, y_min, x_max, y_max) box around the nonzero pixels.

    The box is half-open: x_max/y_max are one past the last nonzero
    column/row, so it satisfies 0 <= x_min < x_max <= W.
    """
    ys, xs = np.nonzero(bitmap)
    if ys.size == 0:
        raise ContractViolation("tight_bbox on an all-zero bitmap")
    return int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1


@dataclass
class RgbImage:
    """H x W x 3 image with float pixel values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float32)
        if p.ndim != 3 or p.shape[2] != 3:
            raise ContractViolation(f"expected (H, W, 3) pixels, got {p.shape}")
        if p.shape[0] < 16 or p.shape[1] < 16:
            raise ContractViolation(f"image must be at least 16x16, got {p.shape[:2]}")
        if not np.isfinite(p).all() or p.min() < 0.0 or p.max() > 1.0:
            raise ContractViolation("pixel values must be finite and in [0, 1]")
        self.pixels = p

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape[:2]


@dataclass
class DepthMap:
    """Single-channel relative depth, unitless and non-negative."""

    values: np.ndarray
    source: str = DEPTH_SOURCE_EXTERNAL

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 2:
            raise ContractViolation(f"expected (H, W) depth, got shape {v.shape}")
        if not np.isfinite(v).all() or v.min() < 0.0:
            raise ContractViolation("depth values must be finite and >= 0")
        if self.source not in (DEPTH_SOURCE_EXTERNAL, DEPTH_SOURCE_SYNTHETIC):
            raise ContractViolation(f"unknown depth source {self.source!r}")
        self.values = v

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass
class InstanceMask:
    """Binary instance mask with its pixel area and tight bounding box."""

    bitmap: np.ndarray
    area: int = 0
    bbox: tuple[int, int, int, int] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        b = np.asarray(self.bitmap)
        if b.ndim != 2:
            raise ContractViolation(f"expected (H, W) bitmap, got shape {b.shape}")
        b = b.astype(bool)
        area = int(b.sum())
        if area == 0:
            raise ContractViolation("InstanceMask must be non-empty; use EmptyMask")
        bbox = tight_bbox(b)
        if self.area and self.area != area:
            raise ContractViolation(f"declared area {self.area} != pixel count {area}")
        if self.bbox is not None and tuple(self.bbox) != bbox:
            raise ContractViolation(f"declared bbox {self.bbox} is not tight ({bbox})")
        self.bitmap = b
        self.area = area
        self.bbox = bbox

    @property
    def shape(self) -> tuple[int, int]:
        return self.bitmap.shape

    @property
    def height(self) -> int:
        return self.bitmap.shape[0]

    @property
    def width(self) -> int:
        return self.bitmap.shape[1]


@dataclass(frozen=True)
class EmptyMask:
    """Designated value for an all-background prediction."""

    height: int
    width: int

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def area(self) -> int:
        return 0


def mask_bitmap(mask) -> np.ndarray:
    """Bool bitmap for an InstanceMask, EmptyMask, or raw array."""
    if isinstance(mask, InstanceMask):
        return mask.bitmap
    if isinstance(mask, EmptyMask):
        return np.zeros(mask.shape, dtype=bool)
    return np.asarray(mask).astype(bool)


@dataclass
class DatasetRecord:
    """One scene: RGB image, aligned depth map, and its instance masks."""

    image: RgbImage
    depth: DepthMap
    masks: list[InstanceMask]
    id: str

    def __post_init__(self):
        if not self.masks:
            raise ContractViolation("DatasetRecord requires at least one mask")
        hw = (self.image.height, self.image.width)
        if self.depth.shape != hw:
            raise ContractViolation(
                f"depth shape {self.depth.shape} != image shape {hw}"
            )
        for i, m in enumerate(self.masks):
            if m.shape != hw:
                raise ContractViolation(f"mask {i} shape {m.shape} != image shape {hw}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.image.height, self.image.width)


SHAPE_KINDS = ("ellipse", "rectangle", "triangle")


@dataclass(frozen=True)
class SyntheticSceneConfig:
    """Parameters of the procedural scene generator."""

    height: int = 128
    width: int = 128
    min_objects: int = 2
    max_objects: int = 4
    shapes: tuple[str, ...] = SHAPE_KINDS
    occlusion_probability: float = 0.5
    texture_noise: float = 0.3
    size_range: tuple[int, int] = (12, 64)
    color_contrast: float = 0.08
    depth_gradient: float = 0.2
    perspective_bias: float = 0.0
    noise_patch_fraction: float = 0.45
    seed: int = 0

    def validate(self) -> "SyntheticSceneConfig":
        problems = []
        if self.height < 16 or self.width < 16:
            problems.append(f"canvas must be at least 16x16, got {self.height}x{self.width}")
        if self.min_objects < 1:
            problems.append(f"min_objects must be >= 1, got {self.min_objects}")
        if self.max_objects < self.min_objects:
            problems.append(
                f"max_objects {self.max_objects} < min_objects {self.min_objects}"
            )
        if not self.shapes:
            problems.append("shape vocabulary is empty")
        for s in self.shapes:
            if s not in SHAPE_KINDS:
                problems.append(f"unknown shape kind {s!r}")
        if not 0.0 <= self.occlusion_probability <= 1.0:
            problems.append(f"occlusion_probability {self.occlusion_probability} not in [0, 1]")
        if not 0.0 <= self.texture_noise <= 1.0:
            problems.append(f"texture_noise {self.texture_noise} not in [0, 1]")
        lo, hi = self.size_range
        if lo < 4:
            problems.append(f"minimum object size {lo} too small (need >= 4)")
        if hi < lo:
            problems.append(f"size_range upper bound {hi} < lower bound {lo}")
        if hi > min(self.height, self.width) - 2:
            problems.append(
                f"object size {hi} cannot fit the {self.height}x{self.width} canvas"
            )
        if not 0.0 <= self.color_contrast <= 0.5:
            problems.append(f"color_contrast {self.color_contrast} not in [0, 0.5]")
        if not 0.0 <= self.depth_gradient < 0.5:
            problems.append(f"depth_gradient {self.depth_gradient} must be in [0, 0.5)")
        if self.perspective_bias < 0.0:
            problems.append(f"perspective_bias {self.perspective_bias} must be >= 0")
        if not 0.0 <= self.noise_patch_fraction <= 1.0:
            problems.append(
                f"noise_patch_fraction {self.noise_patch_fraction} not in [0, 1]")
        if problems:
            raise ConfigError(problems)
        return self

    @property
    def inter_layer_gap(self) -> float:
        """Guaranteed minimum depth discontinuity across visible boundaries."""
        return 1.0 - 2.0 * self.depth_gradient
