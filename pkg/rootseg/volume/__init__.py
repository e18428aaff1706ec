"""Dense volumes, masks, file I/O and rendering."""

from .core import (
    WINDOW_LAYERS,
    VolumeError,
    DimensionError,
    IndexOutOfRangeError,
    Volume3D,
    BinaryMask3D,
    LayerWindow,
    downsample2,
    upsample2_nearest,
    any_pool2,
    layer_window,
    threshold,
    mask_to_volume,
)
from .io import (
    VolumeFormatError,
    TruncatedPayloadError,
    load_volume,
    save_volume,
    load_mask,
    save_mask,
)

__all__ = [
    "WINDOW_LAYERS",
    "VolumeError",
    "DimensionError",
    "IndexOutOfRangeError",
    "Volume3D",
    "BinaryMask3D",
    "LayerWindow",
    "downsample2",
    "upsample2_nearest",
    "any_pool2",
    "layer_window",
    "threshold",
    "mask_to_volume",
    "VolumeFormatError",
    "TruncatedPayloadError",
    "load_volume",
    "save_volume",
    "load_mask",
    "save_mask",
]
