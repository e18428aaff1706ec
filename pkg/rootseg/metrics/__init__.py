"""Standard and distance-tolerant segmentation metrics."""

from .confusion import MetricsError, DimensionMismatchError, confusion, prf
from .dilation import ELEMENTS, dilate3, structuring_element
from .tolerant import dt_prf, dt_curve, brute_force_dt
from .binned import EmptyEvaluationError, snr_binned
from .export import write_report, write_curve, write_binned

__all__ = [
    "MetricsError",
    "DimensionMismatchError",
    "confusion",
    "prf",
    "ELEMENTS",
    "dilate3",
    "structuring_element",
    "dt_prf",
    "dt_curve",
    "brute_force_dt",
    "EmptyEvaluationError",
    "snr_binned",
    "write_report",
    "write_curve",
    "write_binned",
]
