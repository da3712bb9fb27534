"""Ground-truth oracle model for validating evaluation harnesses.

Implements the same set_image/predict interface as the real model but
answers every prompt with the matching ground-truth mask, so any correct
protocol must score it at exactly 1.0.
"""

from __future__ import annotations

import hashlib

import numpy as np
import torch

from ..data.types import DatasetRecord, RgbImage
from ..errors import ContractViolation
from ..models.decoder import MaskPrediction
from ..models.prompts import FOREGROUND, PromptSet


def _image_key(pixels: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(pixels).tobytes()).hexdigest()


class OracleModel:
    def __init__(self, dataset: list[DatasetRecord]):
        self._by_key = {_image_key(r.image.pixels): r for r in dataset}
        self._record: DatasetRecord | None = None

    def set_image(self, image, depth=None) -> None:
        pixels = image.pixels if isinstance(image, RgbImage) else np.asarray(image)
        key = _image_key(pixels.astype(np.float32))
        if key not in self._by_key:
            raise ContractViolation("oracle queried with an unknown image")
        self._record = self._by_key[key]

    def _target_mask(self, prompts: PromptSet):
        record = self._record
        if prompts.points:
            fg = [(x, y) for x, y, lb in prompts.points if lb == FOREGROUND]
            if fg:
                x, y = fg[0]
                for m in record.masks:
                    if m.bitmap[int(round(y)), int(round(x))]:
                        return m
        if prompts.boxes:
            box = prompts.boxes[0]

            def box_iou(b):
                ax0, ay0, ax1, ay1 = box
                bx0, by0, bx1, by1 = b
                ix = max(0.0, min(ax1, bx1) - max(ax0, bx0))
                iy = max(0.0, min(ay1, by1) - max(ay0, by0))
                inter = ix * iy
                union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
                return inter / union if union > 0 else 0.0

            return max(record.masks, key=lambda m: box_iou(m.bbox))
        return max(record.masks, key=lambda m: m.area)

    def predict(self, prompts: PromptSet) -> MaskPrediction:
        if self._record is None:
            raise ContractViolation("predict() before set_image()")
        mask = self._target_mask(prompts)
        logits = torch.where(
            torch.from_numpy(mask.bitmap), torch.tensor(50.0), torch.tensor(-50.0))
        return MaskPrediction(logits=logits, predicted_iou=1.0,
                              direct_logits=[logits[::16, ::16]])
