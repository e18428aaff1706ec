"""3D morphological dilation with ball or cube structuring elements."""

import logging
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy.ndimage import binary_dilation

from rootseg.services.validators import ValidationError, VolumeValidator
from rootseg.volume.core import BinaryMask3D

logger = logging.getLogger(__name__)

Element = Literal["ball", "cube"]
ELEMENTS = ("ball", "cube")


def validate_element(element: str) -> str:
    if element not in ELEMENTS:
        raise ValidationError(
            f"Unknown structuring element {element!r}. Must be one of: ball, cube"
        )
    return element


@lru_cache(maxsize=64)
def structuring_element(d: int, element: str = "ball") -> np.ndarray:
    """Offsets within distance d of the center.

    ``ball`` keeps offsets with i^2 + j^2 + k^2 <= d^2 (Euclidean),
    ``cube`` keeps max(|i|, |j|, |k|) <= d (Chebyshev).
    """
    validate_element(element)
    k, j, i = np.ogrid[-d:d + 1, -d:d + 1, -d:d + 1]
    if element == "ball":
        se = (i * i + j * j + k * k) <= d * d
    else:
        se = np.maximum(np.maximum(np.abs(i), np.abs(j)), np.abs(k)) <= d
    se = np.broadcast_to(se, (2 * d + 1,) * 3).copy()
    se.flags.writeable = False
    return se


def dilate3(mask: BinaryMask3D, d: int, element: str = "ball") -> BinaryMask3D:
    """Dilate a mask by d voxels.

    A voxel is set iff some set voxel of the input lies within distance d
    (Euclidean for ``ball``, Chebyshev for ``cube``). d = 0 is the identity.
    """
    d = VolumeValidator.validate_tolerance(d)
    validate_element(element)
    if d == 0 or not mask.bits.any():
        return mask
    out = binary_dilation(mask.bits, structure=structuring_element(d, element))
    return BinaryMask3D(out)
