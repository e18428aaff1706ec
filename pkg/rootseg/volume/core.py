"""Dense 3D volume and mask types with resampling and layer windows.

Arrays are stored in (z, y, x) order so that a layer ``voxels[k]`` is a
contiguous y-by-x image and z varies slowest on disk.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from rootseg.models.domain import Dims
from rootseg.services.validators import ValidationError, VolumeValidator

logger = logging.getLogger(__name__)

WINDOW_LAYERS = 5
WINDOW_RADIUS = WINDOW_LAYERS // 2


class VolumeError(ValidationError):
    """Base exception for volume operations."""
    pass


class DimensionError(VolumeError):
    """Raised when grid dimensions are invalid for an operation."""
    pass


class IndexOutOfRangeError(VolumeError):
    """Raised when a layer or slice index falls outside the grid."""
    pass


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True, order="C")
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class Volume3D:
    """Scalar field over an x-by-y-by-z voxel grid (float32, finite)."""

    voxels: np.ndarray

    def __post_init__(self):
        voxels = np.asarray(self.voxels, dtype=np.float32)
        if voxels.ndim != 3:
            raise DimensionError(f"Volume must be 3D, got shape {voxels.shape}")
        VolumeValidator.validate_dims(voxels.shape[2], voxels.shape[1], voxels.shape[0])
        if not np.all(np.isfinite(voxels)):
            raise VolumeError("Volume contains non-finite values")
        object.__setattr__(self, "voxels", _frozen(voxels))

    @property
    def dims(self) -> Dims:
        return Dims.from_shape(self.voxels.shape)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Volume3D):
            return NotImplemented
        return self.voxels.shape == other.voxels.shape and np.array_equal(self.voxels, other.voxels)

    def __repr__(self) -> str:
        return f"Volume3D(dims={self.dims})"


@dataclass(frozen=True)
class BinaryMask3D:
    """Boolean voxel grid: root = True, non-root = False."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 3:
            raise DimensionError(f"Mask must be 3D, got shape {bits.shape}")
        VolumeValidator.validate_dims(bits.shape[2], bits.shape[1], bits.shape[0], itemsize=1)
        object.__setattr__(self, "bits", _frozen(bits.astype(bool, copy=False)))

    @property
    def dims(self) -> Dims:
        return Dims.from_shape(self.bits.shape)

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask3D):
            return NotImplemented
        return self.bits.shape == other.bits.shape and np.array_equal(self.bits, other.bits)

    def __repr__(self) -> str:
        return f"BinaryMask3D(dims={self.dims}, set={self.count()})"


@dataclass(frozen=True)
class LayerWindow:
    """Five consecutive layers centered on a target z index.

    Attributes:
        layers: (5, y, x) float32 array
        center: The target z index
        sources: The z index each layer was copied from (after clamping)
    """

    layers: np.ndarray
    center: int
    sources: Tuple[int, ...]

    def __post_init__(self):
        layers = np.asarray(self.layers, dtype=np.float32)
        if layers.ndim != 3 or layers.shape[0] != WINDOW_LAYERS:
            raise DimensionError(
                f"Layer window must have shape (5, y, x), got {layers.shape}"
            )
        object.__setattr__(self, "layers", _frozen(layers))

    @property
    def height(self) -> int:
        return self.layers.shape[1]

    @property
    def width(self) -> int:
        return self.layers.shape[2]


def downsample2(v: Volume3D) -> Volume3D:
    """Average each 2x2x2 block into one voxel.

    Raises:
        DimensionError: If any dimension is odd
    """
    z, y, x = v.voxels.shape
    if z % 2 or y % 2 or x % 2:
        raise DimensionError(f"downsample2 requires even dims, got {v.dims}")
    blocks = v.voxels.astype(np.float64).reshape(z // 2, 2, y // 2, 2, x // 2, 2)
    return Volume3D(blocks.mean(axis=(1, 3, 5)).astype(np.float32))


def upsample2_nearest(v: Volume3D) -> Volume3D:
    """Replicate each voxel into a 2x2x2 block."""
    out = v.voxels
    for axis in range(3):
        out = np.repeat(out, 2, axis=axis)
    return Volume3D(out)


def any_pool2(mask: BinaryMask3D) -> BinaryMask3D:
    """Set a coarse voxel when any voxel of its 2x2x2 block is set.

    Raises:
        DimensionError: If any dimension is odd
    """
    z, y, x = mask.bits.shape
    if z % 2 or y % 2 or x % 2:
        raise DimensionError(f"any_pool2 requires even dims, got {mask.dims}")
    blocks = mask.bits.reshape(z // 2, 2, y // 2, 2, x // 2, 2)
    return BinaryMask3D(blocks.any(axis=(1, 3, 5)))


def window_sources(z_index: int, depth: int) -> Tuple[int, ...]:
    """Clamped source layers for the window centered at z_index."""
    offsets = range(-WINDOW_RADIUS, WINDOW_RADIUS + 1)
    return tuple(min(max(z_index + o, 0), depth - 1) for o in offsets)


def layer_window(v: Volume3D, z_index: int) -> LayerWindow:
    """Extract the 5-layer window around z_index, replicating edge layers.

    Raises:
        IndexOutOfRangeError: If z_index is outside [0, z)
    """
    depth = v.dims.z
    try:
        VolumeValidator.validate_index(z_index, depth, "z index")
    except ValidationError as e:
        raise IndexOutOfRangeError(str(e)) from e
    sources = window_sources(z_index, depth)
    return LayerWindow(layers=v.voxels[list(sources)], center=int(z_index), sources=sources)


def threshold(conf: Volume3D, t: float = 0.5) -> BinaryMask3D:
    """Binarize confidences: a bit is set iff confidence >= t."""
    t = VolumeValidator.validate_threshold(t)
    return BinaryMask3D(conf.voxels >= np.float32(t))


def mask_to_volume(mask: BinaryMask3D) -> Volume3D:
    """View a mask as a 0/1 scalar volume."""
    return Volume3D(mask.bits.astype(np.float32))
