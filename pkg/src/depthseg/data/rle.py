"""Run-length codec for binary masks.

Runs are column-major (Fortran order) and alternate 0-count, 1-count,
0-count, ... starting with the number of leading zeros, matching the
de-facto instance-segmentation annotation convention.
"""

from __future__ import annotations

import numpy as np

from ..errors import MalformedRleError
from .types import EmptyMask, InstanceMask, mask_bitmap


def encode_rle(mask) -> list[int]:
    """Encode an InstanceMask / EmptyMask / bool array as run counts."""
    bitmap = mask_bitmap(mask)
    flat = bitmap.flatten(order="F").astype(np.uint8)
    if flat.size == 0:
        return []
    boundaries = np.nonzero(np.diff(flat))[0]
    runs = np.diff(np.concatenate(([0], boundaries + 1, [flat.size])))
    counts = runs.tolist()
    if flat[0] == 1:
        counts = [0] + counts
    return [int(c) for c in counts]


def decode_rle(counts: list[int], height: int, width: int):
    """Decode run counts back into a mask.

    Returns an InstanceMask, or an EmptyMask when the runs contain no
    foreground pixels.
    """
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts):
        raise MalformedRleError(f"negative run in {counts!r}")
    total = sum(counts)
    if total != height * width:
        raise MalformedRleError(
            f"runs sum to {total}, expected {height}x{width}={height * width}"
        )
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for c in counts:
        if value:
            flat[pos : pos + c] = True
        pos += c
        value = not value
    bitmap = flat.reshape((height, width), order="F")
    if not bitmap.any():
        return EmptyMask(height, width)
    return InstanceMask(bitmap=bitmap)


def rle_to_string(counts: list[int]) -> str:
    """Compact wire form: comma-joined run counts."""
    return ",".join(str(int(c)) for c in counts)


def rle_from_string(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise MalformedRleError(f"unparsable run list {text!r}") from exc
