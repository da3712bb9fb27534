from .types import (
    DEPTH_SOURCE_EXTERNAL,
    DEPTH_SOURCE_SYNTHETIC,
    SHAPE_KINDS,
    DatasetRecord,
    DepthMap,
    EmptyMask,
    InstanceMask,
    RgbImage,
    SyntheticSceneConfig,
    mask_bitmap,
    tight_bbox,
)
from .rle import decode_rle, encode_rle, rle_from_string, rle_to_string
from .depth import prepare_depth
from .synthetic import generate_synthetic_scene, rasterize_silhouette
from .io import load_dataset, load_record, save_record, write_dataset

__all__ = [
    "DEPTH_SOURCE_EXTERNAL",
    "DEPTH_SOURCE_SYNTHETIC",
    "SHAPE_KINDS",
    "DatasetRecord",
    "DepthMap",
    "EmptyMask",
    "InstanceMask",
    "RgbImage",
    "SyntheticSceneConfig",
    "mask_bitmap",
    "tight_bbox",
    "decode_rle",
    "encode_rle",
    "rle_from_string",
    "rle_to_string",
    "prepare_depth",
    "generate_synthetic_scene",
    "rasterize_silhouette",
    "load_dataset",
    "load_record",
    "save_record",
    "write_dataset",
]
