"""Dataset directory layout and (de)serialization.

A dataset directory looks like::

    root/
      manifest.json            ids in order, plus canvas size
      images/<id>.png          8-bit RGB
      depth/<id>.npy           float32 raw depth (16-bit PNG also readable)
      annotations/<id>.json    per-record masks as column-major RLE

All writers are deterministic: identical records produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import ContractViolation
from .rle import decode_rle, encode_rle, rle_from_string, rle_to_string
from .types import DatasetRecord, DepthMap, InstanceMask, RgbImage, mask_bitmap

MANIFEST_NAME = "manifest.json"


def _dump_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")


def save_record(root: Path, record: DatasetRecord) -> None:
    root = Path(root)
    for sub in ("images", "depth", "annotations"):
        (root / sub).mkdir(parents=True, exist_ok=True)

    img8 = np.round(record.image.pixels * 255.0).astype(np.uint8)
    Image.fromarray(img8, mode="RGB").save(root / "images" / f"{record.id}.png")
    np.save(root / "depth" / f"{record.id}.npy", record.depth.values.astype(np.float32))

    masks = []
    for m in record.masks:
        masks.append(
            {
                "rle": rle_to_string(encode_rle(m.bitmap)),
                "bbox": list(m.bbox),
                "area": m.area,
                "meta": m.meta,
            }
        )
    _dump_json(
        root / "annotations" / f"{record.id}.json",
        {
            "id": record.id,
            "height": record.image.height,
            "width": record.image.width,
            "depth_source": record.depth.source,
            "masks": masks,
        },
    )


def write_dataset(root: Path, records: list[DatasetRecord]) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for record in records:
        save_record(root, record)
    _dump_json(root / MANIFEST_NAME, {"ids": [r.id for r in records]})


def load_depth_file(path: Path) -> np.ndarray:
    """Read a raw depth array from .npy (float32) or 16-bit grayscale PNG."""
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path).astype(np.float32)
    if path.suffix == ".png":
        arr = np.asarray(Image.open(path))
        if arr.ndim != 2:
            raise ContractViolation(f"depth png must be single-channel, got shape {arr.shape}")
        return arr.astype(np.float32)
    raise ContractViolation(f"unsupported depth file type: {path.suffix!r}")


def load_record(root: Path, record_id: str, depth_source: str) -> DatasetRecord:
    root = Path(root)
    ann = json.loads((root / "annotations" / f"{record_id}.json").read_text())
    img = np.asarray(Image.open(root / "images" / f"{record_id}.png").convert("RGB"))
    pixels = img.astype(np.float32) / 255.0

    depth_path = root / "depth" / f"{record_id}.npy"
    if not depth_path.exists():
        depth_path = root / "depth" / f"{record_id}.png"
    depth = DepthMap(values=load_depth_file(depth_path), source=ann.get("depth_source", depth_source))

    h, w = ann["height"], ann["width"]
    masks = []
    for entry in ann["masks"]:
        decoded = decode_rle(rle_from_string(entry["rle"]), h, w)
        bitmap = mask_bitmap(decoded)
        masks.append(
            InstanceMask(
                bitmap=bitmap,
                area=entry["area"],
                bbox=tuple(entry["bbox"]),
                meta=entry.get("meta", {}),
            )
        )
    return DatasetRecord(
        image=RgbImage(pixels=pixels),
        depth=depth,
        masks=masks,
        id=ann["id"],
    )


def load_dataset(root: Path) -> list[DatasetRecord]:
    root = Path(root)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        raise ContractViolation(f"no {MANIFEST_NAME} in {root}")
    manifest = json.loads(manifest_path.read_text())
    return [load_record(root, rid, "synthetic_ground_truth") for rid in manifest["ids"]]
