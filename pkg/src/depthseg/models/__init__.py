from .encoder import Encoder, EncoderConfig, FeatureEmbedding, build_encoder, encode
from .fusion import FusionParams, fuse
from .prompts import BACKGROUND, FOREGROUND, PromptEncoder, PromptSet, encode_prompts
from .decoder import MaskDecoder, MaskPrediction, binarize
from .segmenter import Segmenter, SegmenterConfig, build_segmenter
from .accounting import StructuralReport, count_parameters, estimate_macs, structural_report

__all__ = [
    "Encoder",
    "EncoderConfig",
    "FeatureEmbedding",
    "build_encoder",
    "encode",
    "FusionParams",
    "fuse",
    "BACKGROUND",
    "FOREGROUND",
    "PromptEncoder",
    "PromptSet",
    "encode_prompts",
    "MaskDecoder",
    "MaskPrediction",
    "binarize",
    "Segmenter",
    "SegmenterConfig",
    "build_segmenter",
    "StructuralReport",
    "count_parameters",
    "estimate_macs",
    "structural_report",
]
