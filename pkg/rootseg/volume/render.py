"""Slice, overlay and tolerance-curve rendering."""

import os
import subprocess
import sys
from functools import wraps
from pathlib import Path
from typing import Callable, Sequence, Union

import matplotlib
import matplotlib.pyplot as plt
import numpy as np

from rootseg.config.plotting import default_config
from rootseg.config.settings import settings
from rootseg.models.domain import MetricReport
from rootseg.services.validators import ValidationError, VolumeValidator
from rootseg.volume.core import BinaryMask3D, IndexOutOfRangeError, Volume3D

# Use non-interactive backend
matplotlib.use('Agg')

# PNG metadata is pinned so identical inputs give identical bytes.
PNG_METADATA = {"Software": None}

TP_COLOR = (0, 255, 0)
FN_COLOR = (255, 0, 0)
FP_COLOR = (0, 0, 255)


class RenderError(ValidationError):
    """Raised when an image cannot be written."""
    pass


def handle_render_errors(what: str) -> Callable:
    """Decorator turning file-system failures into RenderError."""
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except OSError as e:
                raise RenderError(f"Error creating {what}: {e}") from e
        return wrapper
    return decorator


def open_in_viewer(filepath: Path) -> None:
    """Open the image file with the default viewer."""
    platform = sys.platform
    if platform == 'win32':
        os.startfile(filepath)
    elif platform == 'darwin':  # macOS
        subprocess.run(['open', str(filepath)])
    else:  # Linux
        subprocess.run(['xdg-open', str(filepath)])


def _finish(path: Path) -> Path:
    if settings.open_renders:
        open_in_viewer(path)
    return path


def extract_slice(array: np.ndarray, axis: str, index: int) -> np.ndarray:
    """Take one 2D slice of a (z, y, x) array.

    Args:
        array: Voxel array in (z, y, x) order
        axis: 'x', 'y' or 'z' - the axis held fixed
        index: Position along that axis

    Returns:
        (y, x) for z slices, (z, x) for y slices, (z, y) for x slices

    Raises:
        ValidationError: If the axis name is unknown
        IndexOutOfRangeError: If index is outside the axis
    """
    axis_pos = VolumeValidator.validate_axis(axis)
    storage_axis = 2 - axis_pos
    try:
        VolumeValidator.validate_index(index, array.shape[storage_axis], f"{axis} index")
    except ValidationError as e:
        raise IndexOutOfRangeError(str(e)) from e
    return np.take(array, index, axis=storage_axis)


def normalize_slice(image: np.ndarray) -> np.ndarray:
    """Min-max normalize to [0, 1]; a constant slice maps to 0."""
    image = image.astype(np.float64)
    lo, hi = image.min(), image.max()
    if hi <= lo:
        return np.zeros_like(image)
    return (image - lo) / (hi - lo)


@handle_render_errors("slice image")
def render_slice(v: Volume3D, axis: str, index: int, path: Union[str, Path]) -> Path:
    """Write one slice of a volume as a grayscale PNG.

    Raises:
        IndexOutOfRangeError: If index is outside the chosen axis
        RenderError: If the path is not writable
    """
    path = Path(path)
    image = normalize_slice(extract_slice(v.voxels, axis, index))
    plt.imsave(path, image, cmap="gray", vmin=0.0, vmax=1.0, format="png", metadata=PNG_METADATA)
    return _finish(path)


def overlay_image(
    ground_truth: BinaryMask3D,
    prediction: BinaryMask3D,
    axis: str,
    index: int,
    tolerance: int = 0,
    element: str = "ball",
) -> np.ndarray:
    """Colour-code one slice of a tolerant evaluation.

    Green marks prediction voxels within ``tolerance`` of the ground truth and
    ground-truth voxels within ``tolerance`` of the prediction, red marks
    missed ground truth, blue marks unsupported predictions.

    Returns:
        uint8 RGB image
    """
    from rootseg.metrics.dilation import dilate3

    VolumeValidator.validate_same_shape(ground_truth.bits.shape, prediction.bits.shape, "masks")
    g, s = ground_truth.bits, prediction.bits
    g_dil = dilate3(ground_truth, tolerance, element).bits
    s_dil = dilate3(prediction, tolerance, element).bits

    layers = {
        "tp": (s & g_dil) | (g & s_dil),
        "fn": g & ~s_dil,
        "fp": s & ~g_dil,
    }
    planes = {name: extract_slice(bits, axis, index) for name, bits in layers.items()}

    rgb = np.zeros(planes["tp"].shape + (3,), dtype=np.uint8)
    rgb[planes["tp"]] = TP_COLOR
    rgb[planes["fn"]] = FN_COLOR
    rgb[planes["fp"]] = FP_COLOR
    return rgb


@handle_render_errors("overlay image")
def render_overlay(
    ground_truth: BinaryMask3D,
    prediction: BinaryMask3D,
    axis: str,
    index: int,
    path: Union[str, Path],
    tolerance: int = 0,
    element: str = "ball",
) -> Path:
    """Write a colour overlay of one evaluation slice as PNG."""
    path = Path(path)
    rgb = overlay_image(ground_truth, prediction, axis, index, tolerance, element)
    plt.imsave(path, rgb, format="png", metadata=PNG_METADATA)
    return _finish(path)


@handle_render_errors("tolerance curve")
def render_curve(
    curve: Sequence[MetricReport],
    path: Union[str, Path],
    title: str = "Distance-tolerant metrics",
) -> Path:
    """Plot precision, recall and F1 against the distance tolerance."""
    path = Path(path)
    tolerances = [r.tolerance for r in curve]
    series = {
        "Precision": [r.precision for r in curve],
        "Recall": [r.recall for r in curve],
        "F1-Score": [r.f1 for r in curve],
    }

    fig = plt.figure(figsize=default_config.figsize_medium)
    for (label, values), color in zip(series.items(), default_config.curve_colors):
        plt.plot(
            tolerances, values,
            label=label, color=color,
            linewidth=default_config.line_width, marker='o',
            markersize=default_config.marker_size
        )
    plt.xlabel("Distance tolerance in voxels", fontsize=default_config.label_fontsize)
    plt.ylabel("P-R-F1", fontsize=default_config.label_fontsize)
    plt.ylim(-0.1, 1.1)
    plt.title(title, fontsize=default_config.title_fontsize, fontweight='bold')
    plt.grid(True, alpha=default_config.grid_alpha)
    plt.legend()
    plt.tight_layout()

    try:
        fig.savefig(path, format='png', dpi=default_config.dpi, metadata=PNG_METADATA)
    finally:
        plt.close(fig)  # Clean up to prevent memory leaks
    return _finish(path)
