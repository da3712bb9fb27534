"""Throughput and structural comparison of the two model variants."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation
from ..models.accounting import StructuralReport, structural_report
from ..models.encoder import EncoderConfig
from ..models.prompts import PromptSet
from ..models.segmenter import SegmenterConfig, build_segmenter


def benchmark_throughput(model, input_hw: tuple[int, int] = (128, 128),
                         trials: int = 5, images_per_trial: int = 4,
                         seed: int = 0) -> float:
    """Median images/second over `trials` timed runs after one warm-up."""
    if trials < 3:
        raise ContractViolation(f"need at least 3 trials, got {trials}")
    rng = np.random.default_rng(seed)
    h, w = input_hw
    images = rng.random((images_per_trial, h, w, 3), dtype=np.float32)
    depths = rng.random((images_per_trial, h, w), dtype=np.float32)
    prompt = PromptSet(points=[(w // 2, h // 2, 1)])

    def run_once() -> float:
        t0 = time.perf_counter()
        for i in range(images_per_trial):
            model.set_image(images[i], depths[i])
            model.predict(prompt)
        return images_per_trial / (time.perf_counter() - t0)

    run_once()  # warm-up
    return float(np.median([run_once() for _ in range(trials)]))


@dataclass
class BenchReport:
    structure: StructuralReport
    throughput_rgb_only: float
    throughput_depth_aware: float

    def to_json(self) -> dict:
        out = self.structure.as_dict()
        out["throughput_rgb_only"] = self.throughput_rgb_only
        out["throughput_depth_aware"] = self.throughput_depth_aware
        out["throughput_ratio"] = self.throughput_rgb_only / self.throughput_depth_aware
        return out

    def to_text(self) -> str:
        s = self.structure
        return "\n".join([
            f"preset: {s.preset}   input: {s.input_shape[1]}x{s.input_shape[2]}",
            f"{'':>14} {'params':>12} {'MACs':>14} {'img/s':>10}",
            f"{'rgb_only':>14} {s.params_rgb_only:>12} {s.macs_rgb_only:>14} "
            f"{self.throughput_rgb_only:>10.2f}",
            f"{'depth_aware':>14} {s.params_depth_aware:>12} {s.macs_depth_aware:>14} "
            f"{self.throughput_depth_aware:>10.2f}",
            f"{'ratio':>14} {s.param_ratio:>12.3f} {s.mac_ratio:>14.3f} "
            f"{self.throughput_rgb_only / self.throughput_depth_aware:>10.2f}x",
        ])


def run_benchmark(preset: str, input_hw: tuple[int, int] = (128, 128),
                  trials: int = 5, seed: int = 0) -> BenchReport:
    enc = EncoderConfig.from_preset(preset)
    rgb_only = build_segmenter(SegmenterConfig(encoder=enc, use_depth=False), seed)
    depth_aware = build_segmenter(SegmenterConfig(encoder=enc, use_depth=True), seed)
    rgb_only.eval()
    depth_aware.eval()
    return BenchReport(
        structure=structural_report(preset, input_hw),
        throughput_rgb_only=benchmark_throughput(rgb_only, input_hw, trials, seed=seed),
        throughput_depth_aware=benchmark_throughput(depth_aware, input_hw, trials, seed=seed),
    )
