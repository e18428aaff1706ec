"""Root structural models and their voxelization."""

from .model import (
    RootModelError,
    RootModelSyntaxError,
    DanglingReferenceError,
    SelfLoopError,
    DisconnectedGraphError,
    CyclicGraphError,
    NonPositiveRadiusError,
    RootSystem,
    parse_root_model,
    load_root_model,
    apply_transform,
)
from .voxelize import voxelize_mask, voxelize_signal

__all__ = [
    "RootModelError",
    "RootModelSyntaxError",
    "DanglingReferenceError",
    "SelfLoopError",
    "DisconnectedGraphError",
    "CyclicGraphError",
    "NonPositiveRadiusError",
    "RootSystem",
    "parse_root_model",
    "load_root_model",
    "apply_transform",
    "voxelize_mask",
    "voxelize_signal",
]
