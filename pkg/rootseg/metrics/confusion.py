"""Voxelwise confusion counts and precision / recall / F1."""

import logging

import numpy as np

from rootseg.models.domain import ConfusionCounts, MetricReport
from rootseg.services.validators import ValidationError
from rootseg.volume.core import BinaryMask3D

logger = logging.getLogger(__name__)


class MetricsError(ValidationError):
    """Base exception for metric computations."""
    pass


class DimensionMismatchError(MetricsError):
    """Raised when ground truth and prediction grids differ."""
    pass


def check_same_dims(ground_truth: BinaryMask3D, prediction: BinaryMask3D) -> None:
    """Raise DimensionMismatchError unless both masks share dims."""
    if ground_truth.bits.shape != prediction.bits.shape:
        raise DimensionMismatchError(
            f"Ground truth is {ground_truth.dims} but prediction is {prediction.dims}"
        )


def confusion(ground_truth: BinaryMask3D, prediction: BinaryMask3D) -> ConfusionCounts:
    """Count TP/FP/FN/TN voxels of a prediction against ground truth.

    Raises:
        DimensionMismatchError: If the masks differ in dims
    """
    check_same_dims(ground_truth, prediction)
    g, s = ground_truth.bits, prediction.bits
    tp = int(np.count_nonzero(g & s))
    fp = int(np.count_nonzero(s)) - tp
    fn = int(np.count_nonzero(g)) - tp
    tn = g.size - tp - fp - fn
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def report_from_ratios(
    precision_hits: int,
    predicted: int,
    recall_hits: int,
    actual: int,
    counts: ConfusionCounts,
    tolerance: int = 0,
) -> MetricReport:
    """Build a MetricReport from precision and recall numerators/denominators.

    A zero denominator yields 0 for that ratio and sets the degenerate flag,
    as does p + r == 0 for the F1 score.
    """
    degenerate = False
    if predicted > 0:
        precision = precision_hits / predicted
    else:
        precision, degenerate = 0.0, True
    if actual > 0:
        recall = recall_hits / actual
    else:
        recall, degenerate = 0.0, True
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1, degenerate = 0.0, True

    return MetricReport(
        precision=precision,
        recall=recall,
        f1=f1,
        counts=counts,
        tolerance=tolerance,
        degenerate=degenerate,
    )


def prf(counts: ConfusionCounts) -> MetricReport:
    """Standard precision, recall and F1 from confusion counts."""
    return report_from_ratios(
        precision_hits=counts.tp,
        predicted=counts.tp + counts.fp,
        recall_hits=counts.tp,
        actual=counts.tp + counts.fn,
        counts=counts,
    )
