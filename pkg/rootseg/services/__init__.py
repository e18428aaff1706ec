"""Shared validation services."""

from .validators import ValidationError, VolumeValidator

__all__ = ["ValidationError", "VolumeValidator"]
