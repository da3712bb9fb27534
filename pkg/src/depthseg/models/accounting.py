"""Parameter and multiply-accumulate accounting."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn


def count_parameters(model: nn.Module) -> int:
    """Exact count of trainable scalars."""
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def _conv_macs(module: nn.Conv2d, output: torch.Tensor) -> int:
    k = module.kernel_size[0] * module.kernel_size[1]
    per_out = module.in_channels // module.groups * k
    return output.numel() * per_out


def _tconv_macs(module: nn.ConvTranspose2d, inputs: torch.Tensor) -> int:
    k = module.kernel_size[0] * module.kernel_size[1]
    per_in = module.out_channels // module.groups * k
    return inputs.numel() * per_in


def estimate_macs(model: nn.Module, input_shape: tuple[int, ...]) -> int:
    """Multiply-accumulates for one forward pass on (1, *input_shape).

    Counted per layer from its configured shapes via forward hooks
    (convolutions, transposed convolutions, linear layers). Models that
    need more than a single tensor input expose ``mac_forward``.
    """
    totals = {"macs": 0}
    hooks = []

    def conv_hook(module, inputs, output):
        totals["macs"] += _conv_macs(module, output)

    def tconv_hook(module, inputs, output):
        totals["macs"] += _tconv_macs(module, inputs[0])

    def linear_hook(module, inputs, output):
        totals["macs"] += output.numel() * module.in_features

    for m in model.modules():
        if isinstance(m, nn.Conv2d):
            hooks.append(m.register_forward_hook(conv_hook))
        elif isinstance(m, nn.ConvTranspose2d):
            hooks.append(m.register_forward_hook(tconv_hook))
        elif isinstance(m, nn.Linear):
            hooks.append(m.register_forward_hook(linear_hook))
    try:
        x = torch.zeros(1, *input_shape)
        forward = getattr(model, "mac_forward", model)
        with torch.no_grad():
            forward(x)
    finally:
        for h in hooks:
            h.remove()
    return totals["macs"]


@dataclass
class StructuralReport:
    preset: str
    input_shape: tuple[int, int, int]
    params_rgb_only: int
    params_depth_aware: int
    macs_rgb_only: int
    macs_depth_aware: int

    @property
    def param_ratio(self) -> float:
        return self.params_depth_aware / self.params_rgb_only

    @property
    def mac_ratio(self) -> float:
        return self.macs_depth_aware / self.macs_rgb_only

    def as_dict(self) -> dict:
        return {
            "preset": self.preset,
            "input_shape": list(self.input_shape),
            "params_rgb_only": self.params_rgb_only,
            "params_depth_aware": self.params_depth_aware,
            "param_ratio": self.param_ratio,
            "macs_rgb_only": self.macs_rgb_only,
            "macs_depth_aware": self.macs_depth_aware,
            "mac_ratio": self.mac_ratio,
        }


def structural_report(preset: str, input_hw: tuple[int, int] = (128, 128)) -> StructuralReport:
    from .encoder import EncoderConfig
    from .segmenter import SegmenterConfig, build_segmenter

    enc = EncoderConfig.from_preset(preset)
    rgb_only = build_segmenter(SegmenterConfig(encoder=enc, use_depth=False), seed=0)
    depth_aware = build_segmenter(SegmenterConfig(encoder=enc, use_depth=True), seed=0)
    shape = (3, *input_hw)
    return StructuralReport(
        preset=preset,
        input_shape=shape,
        params_rgb_only=count_parameters(rgb_only),
        params_depth_aware=count_parameters(depth_aware),
        macs_rgb_only=estimate_macs(rgb_only, shape),
        macs_depth_aware=estimate_macs(depth_aware, shape),
    )
