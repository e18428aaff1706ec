"""SNR measurement, SNR targeting and SNR binning.

SNR is the mean signal intensity over root voxels divided by the RMS of the
noise over non-root voxels. Bins split the range 1..100 at half-decades.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from rootseg.services.validators import ValidationError, VolumeValidator
from rootseg.volume.core import BinaryMask3D, Volume3D

logger = logging.getLogger(__name__)

BIN_EDGES = (1.0, 3.16, 10.0, 31.6, 100.0)
BIN_LABELS = ("[1,3.16)", "[3.16,10)", "[10,31.6)", "[31.6,100]")
BELOW = -1
ABOVE = len(BIN_LABELS)
BELOW_LABEL = "below"
ABOVE_LABEL = "above"

ROOT_OCCUPANCY = 0.5


class SynthError(ValidationError):
    """Base exception for synthetic data generation."""
    pass


class DegenerateSignalError(SynthError):
    """Raised when a signal has no root voxels."""
    pass


class ZeroNoiseError(SynthError):
    """Raised when the noise has zero RMS outside the roots."""
    pass


class SnrRangeError(SynthError):
    """Raised for a non-positive SNR."""
    pass


def snr_bin(snr: float) -> int:
    """Bin index of an SNR value.

    Bins are [1,3.16), [3.16,10), [10,31.6), [31.6,100]; values below 1 map to
    BELOW and values above 100 to ABOVE.

    Raises:
        SnrRangeError: If snr is not a positive finite number
    """
    if snr is None or not math.isfinite(snr) or snr <= 0:
        raise SnrRangeError(f"SNR must be a positive finite number, got {snr!r}")
    if snr < BIN_EDGES[0]:
        return BELOW
    if snr > BIN_EDGES[-1]:
        return ABOVE
    for i, upper in enumerate(BIN_EDGES[1:-1]):
        if snr < upper:
            return i
    return len(BIN_LABELS) - 1


def bin_label(index: int) -> str:
    """Human-readable label of a bin index."""
    if index == BELOW:
        return BELOW_LABEL
    if index == ABOVE:
        return ABOVE_LABEL
    return BIN_LABELS[index]


def label_for_snr(snr: Optional[float]) -> str:
    """Bin label of an SNR; noiseless samples (None) count as above range."""
    if snr is None:
        return ABOVE_LABEL
    return bin_label(snr_bin(snr))


def root_mask_from_signal(signal: Volume3D) -> BinaryMask3D:
    """Root voxels of a partial-volume signal at signal resolution.

    Voxels with occupancy >= 0.5 count as root; when none reach that level
    (very thin roots) every occupied voxel counts.

    Raises:
        DegenerateSignalError: If the signal is empty
    """
    bits = signal.voxels >= ROOT_OCCUPANCY
    if not bits.any():
        bits = signal.voxels > 0
    if not bits.any():
        raise DegenerateSignalError("Signal has no root voxels")
    return BinaryMask3D(bits)


def _snr(signal: np.ndarray, noise: np.ndarray, roots: np.ndarray) -> float:
    if not roots.any():
        raise DegenerateSignalError("Root set is empty")
    background = noise[~roots]
    rms = float(np.sqrt(np.mean(np.square(background)))) if background.size else 0.0
    if rms == 0.0:
        raise ZeroNoiseError("Noise RMS over non-root voxels is zero")
    return float(signal[roots].mean()) / rms


def measure_snr(signal: Volume3D, noise: Volume3D, mask: BinaryMask3D) -> float:
    """Mean signal over root voxels divided by the noise RMS over the rest.

    Raises:
        ValidationError: If the dims differ
        DegenerateSignalError: If the mask is empty
        ZeroNoiseError: If the noise RMS is zero
    """
    VolumeValidator.validate_same_shape(signal.voxels.shape, noise.voxels.shape, "signal and noise")
    VolumeValidator.validate_same_shape(signal.voxels.shape, mask.bits.shape, "signal and mask")
    return _snr(
        signal.voxels.astype(np.float64),
        noise.voxels.astype(np.float64),
        mask.bits,
    )


@dataclass(frozen=True)
class ComposedSample:
    """Result of composing signal and noise at a target SNR.

    Attributes:
        volume: Composite normalized to [0, 1]
        noise_scale: Factor applied to the noise field
        norm_offset: Minimum subtracted before scaling
        norm_scale: Divisor of the normalization
        measured_snr: SNR of the normalized signal and noise components
    """
    volume: Volume3D
    noise_scale: float
    norm_offset: float
    norm_scale: float
    measured_snr: float


def normalize_unit(values: np.ndarray):
    """Min-max normalize to [0, 1]; returns (normalized, offset, scale)."""
    lo, hi = float(values.min()), float(values.max())
    scale = hi - lo if hi > lo else 1.0
    return (values - lo) / scale, lo, scale


def compose_sample(
    signal: Volume3D,
    noise: Volume3D,
    target_snr: float,
    mask: Optional[BinaryMask3D] = None,
) -> ComposedSample:
    """Scale noise to hit target_snr, add it to the signal, normalize to [0, 1].

    Args:
        signal: Partial-volume root signal at input resolution
        noise: Summed noise field, same dims
        target_snr: Desired SNR (> 0)
        mask: Root voxels; derived from the signal when omitted

    Raises:
        SnrRangeError: If target_snr is not positive
        DegenerateSignalError: If the signal has no root voxels
        ZeroNoiseError: If the noise has zero RMS outside the roots
    """
    if target_snr is None or not math.isfinite(target_snr) or target_snr <= 0:
        raise SnrRangeError(f"Target SNR must be positive, got {target_snr!r}")
    if mask is None:
        mask = root_mask_from_signal(signal)

    current = measure_snr(signal, noise, mask)
    noise_scale = current / target_snr

    s = signal.voxels.astype(np.float64)
    n = noise.voxels.astype(np.float64) * noise_scale
    composite, offset, scale = normalize_unit(s + n)
    measured = _snr(s / scale, n / scale, mask.bits)
    logger.debug(
        f"Composed sample: current SNR {current:.4g}, target {target_snr:.4g}, "
        f"noise scale {noise_scale:.4g}, measured {measured:.4g}"
    )

    return ComposedSample(
        volume=Volume3D(composite.astype(np.float32)),
        noise_scale=noise_scale,
        norm_offset=offset,
        norm_scale=scale,
        measured_snr=measured,
    )
