"""Binary volume (.vol3) and mask (.msk3) file I/O.

Layout: a fixed 32-byte little-endian header

    magic (4 bytes) | version (u16) | value-type tag (u16) | x, y, z (u64 each)

followed by the raw payload in (z, y, x) order: float32 for volumes, one
byte per voxel (0 or 1) for masks.
"""

import logging
import struct
import sys
from pathlib import Path
from typing import Union

import numpy as np

from rootseg.volume.core import BinaryMask3D, Volume3D, VolumeError

logger = logging.getLogger(__name__)

HEADER = struct.Struct("<4sHHQQQ")
FORMAT_VERSION = 1
VOLUME_MAGIC = b"VOL3"
MASK_MAGIC = b"MSK3"
TAG_FLOAT32 = 1
TAG_UINT8 = 2

PathLike = Union[str, Path]


class VolumeFormatError(VolumeError):
    """Raised when a file header is malformed."""
    pass


class TruncatedPayloadError(VolumeFormatError):
    """Raised when the payload size does not match the header dims."""
    pass


def _encode(magic: bytes, tag: int, shape, payload: bytes) -> bytes:
    z, y, x = shape
    return HEADER.pack(magic, FORMAT_VERSION, tag, x, y, z) + payload


def _decode(data: bytes, magic: bytes, tag: int, itemsize: int, source: str):
    if len(data) < HEADER.size:
        raise VolumeFormatError(f"{source}: file shorter than the {HEADER.size}-byte header")

    got_magic, version, got_tag, x, y, z = HEADER.unpack_from(data)
    if got_magic != magic:
        raise VolumeFormatError(f"{source}: bad magic {got_magic!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise VolumeFormatError(f"{source}: unsupported format version {version}")
    if got_tag != tag:
        raise VolumeFormatError(f"{source}: value-type tag {got_tag}, expected {tag}")
    if min(x, y, z) == 0:
        raise VolumeFormatError(f"{source}: zero dimension in header ({x}x{y}x{z})")

    count = x * y * z
    if count * itemsize > sys.maxsize:
        raise VolumeFormatError(f"{source}: dimensions {x}x{y}x{z} overflow the addressable size")

    payload = memoryview(data)[HEADER.size:]
    if len(payload) != count * itemsize:
        raise TruncatedPayloadError(
            f"{source}: header declares {x}x{y}x{z} = {count} values "
            f"but payload holds {len(payload) / itemsize:g}"
        )
    return (z, y, x), payload


def volume_to_bytes(v: Volume3D) -> bytes:
    """Serialize a volume into .vol3 bytes."""
    payload = v.voxels.astype("<f4", copy=False).tobytes(order="C")
    return _encode(VOLUME_MAGIC, TAG_FLOAT32, v.voxels.shape, payload)


def volume_from_bytes(data: bytes, source: str = "<bytes>") -> Volume3D:
    """Parse .vol3 bytes.

    Raises:
        VolumeFormatError: If the header is malformed
        TruncatedPayloadError: If the payload size does not match the header
    """
    shape, payload = _decode(data, VOLUME_MAGIC, TAG_FLOAT32, 4, source)
    voxels = np.frombuffer(payload, dtype="<f4").reshape(shape)
    try:
        return Volume3D(voxels.astype(np.float32))
    except VolumeError as e:
        raise VolumeFormatError(f"{source}: {e}") from e


def mask_to_bytes(mask: BinaryMask3D) -> bytes:
    """Serialize a mask into .msk3 bytes."""
    payload = mask.bits.astype(np.uint8).tobytes(order="C")
    return _encode(MASK_MAGIC, TAG_UINT8, mask.bits.shape, payload)


def mask_from_bytes(data: bytes, source: str = "<bytes>") -> BinaryMask3D:
    """Parse .msk3 bytes.

    Raises:
        VolumeFormatError: If the header is malformed or a byte is not 0/1
        TruncatedPayloadError: If the payload size does not match the header
    """
    shape, payload = _decode(data, MASK_MAGIC, TAG_UINT8, 1, source)
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(shape)
    if raw.size and raw.max() > 1:
        raise VolumeFormatError(f"{source}: mask payload contains values other than 0 and 1")
    return BinaryMask3D(raw.astype(bool))


def save_volume(v: Volume3D, path: PathLike) -> Path:
    """Write a volume to a .vol3 file."""
    path = Path(path)
    path.write_bytes(volume_to_bytes(v))
    logger.debug(f"Wrote volume {v.dims} to {path}")
    return path


def load_volume(path: PathLike) -> Volume3D:
    """Read a volume from a .vol3 file.

    Raises:
        FileNotFoundError: If the file does not exist
        VolumeFormatError: If the file is malformed
    """
    path = Path(path)
    return volume_from_bytes(path.read_bytes(), source=str(path))


def save_mask(mask: BinaryMask3D, path: PathLike) -> Path:
    """Write a mask to a .msk3 file."""
    path = Path(path)
    path.write_bytes(mask_to_bytes(mask))
    logger.debug(f"Wrote mask {mask.dims} to {path}")
    return path


def load_mask(path: PathLike) -> BinaryMask3D:
    """Read a mask from a .msk3 file.

    Raises:
        FileNotFoundError: If the file does not exist
        VolumeFormatError: If the file is malformed
    """
    path = Path(path)
    return mask_from_bytes(path.read_bytes(), source=str(path))
