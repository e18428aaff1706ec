"""Validation utilities for volumes, grids and user-supplied parameters.

This module provides the shared input-error type and static validators used
by every stage of the pipeline, so that bad input surfaces with a clear
message (and the CLI's usage exit code) instead of a deep numpy traceback.
"""

import math
import numbers
import sys
from typing import Sequence
import logging

logger = logging.getLogger(__name__)


class ValidationError(Exception):
    """Raised when validation fails."""
    pass


class VolumeValidator:
    """Validator for voxel grids and scalar parameters.

    Provides static methods for validating dimensions, indices, thresholds and
    tolerances used throughout the pipeline.
    """

    AXES = ("x", "y", "z")

    @staticmethod
    def validate_dims(x: int, y: int, z: int, itemsize: int = 4) -> tuple[int, int, int]:
        """Validate grid dimensions.

        Args:
            x, y, z: Voxel counts per axis
            itemsize: Bytes per voxel, used for the addressable-size check

        Returns:
            The dimensions as plain ints

        Raises:
            ValidationError: If a dimension is not positive or the grid is too large
        """
        dims = []
        for name, value in zip(VolumeValidator.AXES, (x, y, z)):
            if isinstance(value, bool) or int(value) != value:
                raise ValidationError(f"Dimension {name} must be an integer, got {value!r}")
            if value <= 0:
                raise ValidationError(f"Dimension {name} must be positive, got {value}")
            dims.append(int(value))

        total = dims[0] * dims[1] * dims[2] * itemsize
        if total > sys.maxsize:
            raise ValidationError(
                f"Grid {dims[0]}x{dims[1]}x{dims[2]} exceeds the addressable size"
            )
        return dims[0], dims[1], dims[2]

    @staticmethod
    def validate_axis(axis: str) -> int:
        """Validate an axis name.

        Args:
            axis: One of 'x', 'y', 'z'

        Returns:
            The axis position in (x, y, z) order

        Raises:
            ValidationError: If the axis name is unknown
        """
        if not isinstance(axis, str) or axis.strip().lower() not in VolumeValidator.AXES:
            raise ValidationError(f"Invalid axis: {axis!r}. Must be one of: x, y, z")
        return VolumeValidator.AXES.index(axis.strip().lower())

    @staticmethod
    def validate_index(index: int, size: int, what: str = "index") -> int:
        """Validate an index against an axis length.

        Raises:
            ValidationError: If the index is outside [0, size)
        """
        if isinstance(index, bool) or int(index) != index:
            raise ValidationError(f"{what} must be an integer, got {index!r}")
        if not 0 <= index < size:
            raise ValidationError(f"{what} {index} out of range [0, {size})")
        return int(index)

    @staticmethod
    def validate_threshold(t: float) -> float:
        """Validate a confidence threshold.

        Raises:
            ValidationError: If t is not a finite value in [0, 1]
        """
        if isinstance(t, bool) or not isinstance(t, numbers.Real) or not math.isfinite(t):
            raise ValidationError(f"Threshold must be a finite number, got {t!r}")
        if not 0.0 <= t <= 1.0:
            raise ValidationError(f"Threshold must lie in [0, 1], got {t}")
        return float(t)

    @staticmethod
    def validate_tolerance(d: int) -> int:
        """Validate a distance tolerance in voxels.

        Raises:
            ValidationError: If d is not a non-negative integer
        """
        if (
            isinstance(d, bool)
            or not isinstance(d, numbers.Real)
            or not math.isfinite(d)
            or int(d) != d
        ):
            raise ValidationError(f"Tolerance must be an integer number of voxels, got {d!r}")
        if d < 0:
            raise ValidationError(f"Tolerance cannot be negative: {d}")
        return int(d)

    @staticmethod
    def validate_positive(value: float, name: str) -> float:
        """Validate a strictly positive finite scalar.

        Raises:
            ValidationError: If value is not finite or not > 0
        """
        if (
            isinstance(value, bool)
            or not isinstance(value, numbers.Real)
            or not math.isfinite(value)
        ):
            raise ValidationError(f"{name} must be a finite number, got {value!r}")
        if value <= 0:
            raise ValidationError(f"{name} must be greater than zero, got {value}")
        return float(value)

    @staticmethod
    def validate_same_shape(a: Sequence[int], b: Sequence[int], what: str = "volumes") -> None:
        """Validate that two grids have identical dimensions.

        Raises:
            ValidationError: If the shapes differ
        """
        if tuple(a) != tuple(b):
            raise ValidationError(f"Dimension mismatch between {what}: {tuple(a)} vs {tuple(b)}")
