"""Validation of a predictor on a generated dataset, reported per SNR bin."""

import logging
from pathlib import Path
from typing import Callable, Union

from rootseg.metrics.binned import snr_binned
from rootseg.models.domain import DatasetManifest, SnrBinnedReport, Split
from rootseg.net.inference import segment_volume
from rootseg.net.refinenet import SegNet
from rootseg.services.validators import ValidationError
from rootseg.synth.dataset import load_pair
from rootseg.volume.core import Volume3D, threshold

logger = logging.getLogger(__name__)

Predictor = Union[SegNet, Callable[[Volume3D], Volume3D]]


class EmptyDatasetError(ValidationError):
    """Raised when a split has no samples."""
    pass


def as_predictor(model: Predictor) -> Callable[[Volume3D], Volume3D]:
    """Wrap a network as a volume-to-confidence function."""
    if isinstance(model, SegNet):
        return lambda v: segment_volume(v, model)
    return model


def validate(
    model: Predictor,
    manifest: DatasetManifest,
    dataset_dir: Union[str, Path],
    threshold_value: float = 0.5,
    split: Split = Split.VALIDATION,
) -> SnrBinnedReport:
    """Segment every volume of a split and report P/R/F1 per SNR bin.

    Args:
        model: Trained network, or any function mapping an input volume to a
            confidence volume at twice its resolution
        manifest: Dataset manifest
        dataset_dir: Directory the manifest paths are relative to
        threshold_value: Confidence threshold for a root voxel
        split: Split to evaluate

    Raises:
        EmptyDatasetError: If the split has no entries
    """
    entries = manifest.split(split)
    if not entries:
        raise EmptyDatasetError(f"The {split.value} split is empty")

    predict = as_predictor(model)
    pairs = []
    for entry in entries:
        pair = load_pair(dataset_dir, entry)
        prediction = threshold(predict(pair.input), threshold_value)
        pairs.append((pair.ground_truth, prediction, pair.meta.measured_snr))

    report = snr_binned(pairs)
    logger.info(
        f"Validation on {len(entries)} {split.value} samples: "
        + ", ".join(f"{b.label} F1={b.report.f1:.4f}" for b in report.bins)
    )
    return report
