from __future__ import annotations

import json

import numpy as np
from PIL import Image

from depthseg.data.io import (
    load_dataset,
    load_depth_file,
    load_record,
    save_record,
    write_dataset,
)


def _hash_tree(root):
    import hashlib

    digest = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        digest.update(str(path.relative_to(root)).encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


def test_write_is_deterministic(tmp_path, tiny_dataset):
    a, b = tmp_path / "a", tmp_path / "b"
    write_dataset(a, tiny_dataset)
    write_dataset(b, tiny_dataset)
    assert _hash_tree(a) == _hash_tree(b)


def test_round_trip_preserves_everything(tmp_path, tiny_dataset):
    root = tmp_path / "ds"
    write_dataset(root, tiny_dataset)
    back = load_dataset(root)
    assert [r.id for r in back] == [r.id for r in tiny_dataset]
    for orig, loaded in zip(tiny_dataset, back):
        # pixels were quantized to 8 bits at generation time, so the PNG
        # round trip is exact
        assert np.array_equal(orig.image.pixels, loaded.image.pixels)
        assert np.array_equal(orig.depth.values, loaded.depth.values)
        assert orig.depth.source == loaded.depth.source
        assert len(orig.masks) == len(loaded.masks)
        for mo, ml in zip(orig.masks, loaded.masks):
            assert np.array_equal(mo.bitmap, ml.bitmap)
            assert mo.area == ml.area and mo.bbox == ml.bbox


def test_manifest_lists_ids_in_order(tmp_path, tiny_dataset):
    root = tmp_path / "ds"
    write_dataset(root, tiny_dataset)
    manifest = json.loads((root / "manifest.json").read_text())
    assert manifest["ids"] == [r.id for r in tiny_dataset]


def test_depth_16bit_png_fallback(tmp_path, tiny_dataset):
    root = tmp_path / "ds"
    write_dataset(root, tiny_dataset)
    rec = tiny_dataset[0]
    npy = root / "depth" / f"{rec.id}.npy"
    scaled = (rec.depth.values / rec.depth.values.max() * 65535).astype(np.uint16)
    Image.fromarray(scaled).save(npy.with_suffix(".png"))
    npy.unlink()
    loaded = load_record(root, rec.id, rec.depth.source)
    assert loaded.depth.values.shape == rec.depth.values.shape
    assert loaded.depth.values.dtype == np.float32
    assert loaded.depth.values.max() == 65535.0


def test_load_depth_file_npy(tmp_path):
    arr = np.linspace(0, 3, 12, dtype=np.float32).reshape(3, 4)
    path = tmp_path / "d.npy"
    np.save(path, arr)
    assert np.array_equal(load_depth_file(path), arr)
