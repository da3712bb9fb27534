"""Procedural RGB-D scene generator.

Scenes are stacks of simple shapes on a flat background. Every object
gets its own depth layer (1 = nearest, background = N + 1) plus a small
linear ramp inside the object, so occlusion boundaries always show up as
depth discontinuities of at least ``config.inter_layer_gap``. Object
colors are drawn close to the background color and buried under texture
noise, which keeps RGB boundaries ambiguous while depth stays crisp.
``perspective_bias`` couples layer order to object size (larger objects
nearer, as perspective projection would), which pushes occlusion
fragmentation onto the small far objects.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import ConfigError
from .types import (
    DEPTH_SOURCE_SYNTHETIC,
    DatasetRecord,
    DepthMap,
    InstanceMask,
    RgbImage,
    SyntheticSceneConfig,
)

_MARGIN = 1  # keep full silhouettes strictly inside the canvas


def _pixel_centers(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:height, 0:width]
    return xs + 0.5, ys + 0.5


def rasterize_silhouette(params: dict, height: int, width: int) -> np.ndarray:
    """Full (unoccluded) silhouette of one object as a bool bitmap.

    Pixel (y, x) belongs to the shape when its center (x + 0.5, y + 0.5)
    lies inside the analytic shape.
    """
    px, py = _pixel_centers(height, width)
    kind = params["kind"]
    if kind == "ellipse":
        cx, cy = params["center"]
        rx, ry = params["radii"]
        return ((px - cx) / rx) ** 2 + ((py - cy) / ry) ** 2 <= 1.0
    if kind == "rectangle":
        x0, y0, x1, y1 = params["extent"]
        return (px >= x0) & (px < x1) & (py >= y0) & (py < y1)
    if kind == "triangle":
        (ax, ay), (bx, by), (cx, cy) = params["vertices"]
        d1 = (px - bx) * (ay - by) - (ax - bx) * (py - by)
        d2 = (px - cx) * (by - cy) - (bx - cx) * (py - cy)
        d3 = (px - ax) * (cy - ay) - (cx - ax) * (py - ay)
        neg = (d1 < 0) | (d2 < 0) | (d3 < 0)
        pos = (d1 > 0) | (d2 > 0) | (d3 > 0)
        return ~(neg & pos)
    raise ConfigError([f"unknown shape kind {kind!r}"])


def _sample_shape(config: SyntheticSceneConfig, rng: np.random.Generator,
                  anchor: tuple[float, float] | None) -> dict:
    lo, hi = config.size_range
    w = int(rng.integers(lo, hi + 1))
    h = int(rng.integers(lo, hi + 1))
    half_w, half_h = w / 2.0, h / 2.0
    if anchor is None:
        cx = rng.uniform(half_w + _MARGIN, config.width - half_w - _MARGIN)
        cy = rng.uniform(half_h + _MARGIN, config.height - half_h - _MARGIN)
    else:
        # Land near the anchor so silhouettes overlap, then clamp into canvas.
        radius = rng.uniform(0.2, 0.7) * (half_w + half_h)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        cx = anchor[0] + radius * np.cos(angle)
        cy = anchor[1] + radius * np.sin(angle)
        cx = float(np.clip(cx, half_w + _MARGIN, config.width - half_w - _MARGIN))
        cy = float(np.clip(cy, half_h + _MARGIN, config.height - half_h - _MARGIN))
    kind = str(rng.choice(list(config.shapes)))
    params: dict = {"kind": kind, "center": (float(cx), float(cy)), "size": (w, h)}
    if kind == "ellipse":
        params["radii"] = (half_w, half_h)
    elif kind == "rectangle":
        params["extent"] = (cx - half_w, cy - half_h, cx + half_w, cy + half_h)
    else:
        x0, y0 = cx - half_w, cy - half_h
        for _ in range(8):
            verts = [(x0 + rng.uniform(0, w), y0 + rng.uniform(0, h)) for _ in range(3)]
            (ax, ay), (bx, by), (cx2, cy2) = verts
            area = abs((bx - ax) * (cy2 - ay) - (cx2 - ax) * (by - ay)) / 2.0
            if area >= 0.2 * w * h:
                break
        else:
            verts = [(x0, y0 + h), (x0 + w, y0 + h), (x0 + w / 2.0, y0)]
        params["vertices"] = tuple((float(vx), float(vy)) for vx, vy in verts)
    return params


def _smooth_noise(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Low-frequency noise field in [-0.5, 0.5], bilinearly upsampled."""
    gh = max(2, height // 8)
    gw = max(2, width // 8)
    coarse = rng.uniform(-0.5, 0.5, size=(gh, gw, 3))
    zoomed = ndimage.zoom(coarse, (height / gh, width / gw, 1), order=1, mode="nearest")
    return zoomed[:height, :width, :]


def generate_synthetic_scene(config: SyntheticSceneConfig, seed: int) -> DatasetRecord:
    """Deterministically render one scene from (config, seed).

    Depth layering drives occlusion: per pixel, the object with the
    smallest depth value owns it. Each mask therefore contains only
    visible pixels, and fully occluded objects are dropped.
    """
    config.validate()
    rng = np.random.default_rng([int(config.seed), int(seed)])
    H, W = config.height, config.width

    n_objects = int(rng.integers(config.min_objects, config.max_objects + 1))
    shapes: list[dict] = []
    for i in range(n_objects):
        anchor = None
        if i > 0 and rng.uniform() < config.occlusion_probability:
            target = shapes[int(rng.integers(0, len(shapes)))]
            anchor = target["center"]
        shapes.append(_sample_shape(config, rng, anchor))

    # Depth order (layer 1 = nearest).  With perspective_bias > 0 larger
    # objects tend to sit nearer, the way projection makes near objects
    # big: Plackett-Luce sampling over log-areas via Gumbel noise, so
    # bias 0 is a uniform permutation and large bias is nearly strict
    # size order while similar sizes still shuffle.
    areas = np.array([p["size"][0] * p["size"][1] for p in shapes], dtype=float)
    score = config.perspective_bias * np.log(areas) + rng.gumbel(size=n_objects)
    order = np.argsort(-score, kind="stable")
    layers = np.empty(n_objects, dtype=int)
    layers[order] = np.arange(1, n_objects + 1)

    silhouettes = [rasterize_silhouette(p, H, W) for p in shapes]
    px, py = _pixel_centers(H, W)

    background_depth = float(n_objects + 1)
    depth = np.full((H, W), background_depth, dtype=np.float32)
    owner = np.full((H, W), -1, dtype=int)
    for i in np.argsort(-layers):  # render far to near; near overwrites
        sil = silhouettes[i]
        layer = float(layers[i])
        if config.depth_gradient > 0.0:
            theta = rng.uniform(0.0, 2.0 * np.pi)
            cx, cy = shapes[i]["center"]
            w, h = shapes[i]["size"]
            proj = (px - cx) * np.cos(theta) + (py - cy) * np.sin(theta)
            extent = max((abs(np.cos(theta)) * w + abs(np.sin(theta)) * h) / 2.0, 1.0)
            ramp = np.clip(proj / extent, -1.0, 1.0) * config.depth_gradient
        else:
            ramp = 0.0
        depth[sil] = (layer + ramp)[sil] if np.ndim(ramp) else layer
        owner[sil] = i

    base_color = rng.uniform(0.35, 0.65, size=3)
    colors = np.empty((H, W, 3), dtype=np.float64)
    colors[:] = base_color
    object_colors = []
    for i in range(n_objects):
        c = np.clip(
            base_color + rng.uniform(-config.color_contrast, config.color_contrast, 3),
            0.0, 1.0,
        )
        object_colors.append(c)
        colors[owner == i] = c

    if config.texture_noise > 0.0:
        # Per-pixel grain averages out over area; low-frequency patches do
        # not, so the patch fraction controls whether big regions stay
        # separable under heavy noise.
        grain = rng.uniform(-0.5, 0.5, size=(H, W, 3))
        patches = _smooth_noise(rng, H, W)
        f = config.noise_patch_fraction
        colors = colors + config.texture_noise * ((1.0 - f) * grain + f * patches)
    # Quantize to 8 bits so lossless raster files round-trip bit-exactly.
    pixels = np.round(np.clip(colors, 0.0, 1.0) * 255.0) / 255.0

    masks = []
    for i in range(n_objects):
        visible = owner == i
        if not visible.any():
            continue
        masks.append(
            InstanceMask(
                bitmap=visible,
                meta={
                    "shape": shapes[i],
                    "layer": int(layers[i]),
                    "silhouette_area": int(silhouettes[i].sum()),
                },
            )
        )

    return DatasetRecord(
        image=RgbImage(pixels=pixels.astype(np.float32)),
        depth=DepthMap(values=depth, source=DEPTH_SOURCE_SYNTHETIC),
        masks=masks,
        id=f"scene-{int(seed):06d}",
    )
