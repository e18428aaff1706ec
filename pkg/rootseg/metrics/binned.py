"""Metrics grouped by SNR bin.

Counts are pooled (micro-averaged) within each bin; the mean of per-sample F1
values is reported next to the pooled numbers.
"""

import logging
from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from rootseg.models.domain import BinReport, ConfusionCounts, SnrBinnedReport
from rootseg.metrics.confusion import MetricsError, confusion, prf
from rootseg.synth.snr import ABOVE_LABEL, BELOW_LABEL, BIN_LABELS, label_for_snr
from rootseg.volume.core import BinaryMask3D

logger = logging.getLogger(__name__)

LABEL_ORDER = (BELOW_LABEL,) + BIN_LABELS + (ABOVE_LABEL,)

ScoredPair = Tuple[BinaryMask3D, BinaryMask3D, Optional[float]]


class EmptyEvaluationError(MetricsError):
    """Raised when there is nothing to evaluate."""
    pass


def snr_binned(pairs: Sequence[ScoredPair]) -> SnrBinnedReport:
    """Pool confusion counts per SNR bin and report P/R/F1 per bin and overall.

    Args:
        pairs: (ground truth, prediction, snr) triples; snr None marks a
            noiseless sample, which is binned above range

    Returns:
        Report with one entry per occupied bin, in ascending SNR order

    Raises:
        EmptyEvaluationError: If pairs is empty
        DimensionMismatchError: If a pair's masks differ in dims
    """
    if not pairs:
        raise EmptyEvaluationError("Cannot build an SNR-binned report from zero samples")

    pooled: Dict[str, ConfusionCounts] = defaultdict(ConfusionCounts.zero)
    sample_f1: Dict[str, List[float]] = defaultdict(list)
    overall = ConfusionCounts.zero()

    # Reduction runs in input order so pooled counts do not depend on scheduling.
    for ground_truth, prediction, snr in pairs:
        counts = confusion(ground_truth, prediction)
        label = label_for_snr(snr)
        pooled[label] = pooled[label] + counts
        sample_f1[label].append(prf(counts).f1)
        overall = overall + counts

    bins = [
        BinReport(
            label=label,
            report=prf(pooled[label]),
            n_samples=len(sample_f1[label]),
            macro_f1=float(np.mean(sample_f1[label])),
        )
        for label in LABEL_ORDER
        if label in pooled
    ]
    all_f1 = [f for values in sample_f1.values() for f in values]

    report = SnrBinnedReport(
        bins=bins,
        overall=prf(overall),
        mean_sample_f1=float(np.mean(all_f1)),
        n_samples=len(pairs),
    )
    logger.info(
        f"Evaluated {len(pairs)} samples: overall F1 {report.overall.f1:.4f}, "
        f"mean sample F1 {report.mean_sample_f1:.4f}"
    )
    return report
