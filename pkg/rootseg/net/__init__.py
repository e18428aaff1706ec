"""Super-resolution segmentation network and inference."""

from .pca import PcaBasis, RgbEncoding, fit_pca, fit_volume_pca, pca_compress
from .blocks import ShapeError, RefineBlock, refine_block
from .refinenet import (
    SegNet,
    PredictionPair,
    build_network,
    encoder_forward,
    forward,
    check_divisible,
    nearest_valid,
)
from .inference import prepare_windows, segment_volume

__all__ = [
    "PcaBasis",
    "RgbEncoding",
    "fit_pca",
    "fit_volume_pca",
    "pca_compress",
    "ShapeError",
    "RefineBlock",
    "refine_block",
    "SegNet",
    "PredictionPair",
    "build_network",
    "encoder_forward",
    "forward",
    "check_divisible",
    "nearest_valid",
    "prepare_windows",
    "segment_volume",
]
