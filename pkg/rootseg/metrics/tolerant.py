"""Distance-tolerant precision, recall and F1.

    p' = sum(dilate(G, d) * S) / sum(S)
    r' = sum(G * dilate(S, d)) / sum(G)

``brute_force_dt`` computes the same quantities by nearest-neighbour queries
without building any dilation, and serves as an independent oracle.
"""

import logging
from typing import List

import numpy as np
from scipy.spatial import cKDTree

from rootseg.models.domain import MetricReport
from rootseg.metrics.confusion import check_same_dims, confusion, report_from_ratios
from rootseg.metrics.dilation import dilate3, validate_element
from rootseg.services.validators import VolumeValidator
from rootseg.volume.core import BinaryMask3D

logger = logging.getLogger(__name__)


def dt_prf(
    ground_truth: BinaryMask3D,
    prediction: BinaryMask3D,
    d: int,
    element: str = "ball",
) -> MetricReport:
    """Distance-tolerant precision / recall / F1 at tolerance d.

    Raises:
        DimensionMismatchError: If the masks differ in dims
    """
    check_same_dims(ground_truth, prediction)
    d = VolumeValidator.validate_tolerance(d)
    g, s = ground_truth.bits, prediction.bits
    g_dil = dilate3(ground_truth, d, element).bits
    s_dil = dilate3(prediction, d, element).bits

    return report_from_ratios(
        precision_hits=int(np.count_nonzero(g_dil & s)),
        predicted=int(np.count_nonzero(s)),
        recall_hits=int(np.count_nonzero(g & s_dil)),
        actual=int(np.count_nonzero(g)),
        counts=confusion(ground_truth, prediction),
        tolerance=d,
    )


def dt_curve(
    ground_truth: BinaryMask3D,
    prediction: BinaryMask3D,
    d_max: int,
    element: str = "ball",
) -> List[MetricReport]:
    """One tolerant report per tolerance 0..d_max."""
    d_max = VolumeValidator.validate_tolerance(d_max)
    return [dt_prf(ground_truth, prediction, d, element) for d in range(d_max + 1)]


def _within(source: np.ndarray, targets: np.ndarray, d: int, element: str) -> int:
    """Count points of ``source`` that have some point of ``targets`` within d."""
    if len(source) == 0 or len(targets) == 0:
        return 0
    tree = cKDTree(targets)
    p = 2 if element == "ball" else np.inf
    dist, _ = tree.query(source, k=1, p=p)
    return int(np.count_nonzero(dist <= d))


def brute_force_dt(
    ground_truth: BinaryMask3D,
    prediction: BinaryMask3D,
    d: int,
    element: str = "ball",
) -> MetricReport:
    """Tolerant metrics by nearest-neighbour search (oracle for dt_prf).

    Intended for small masks; every set voxel of one mask is tested for a set
    voxel of the other within distance d.
    """
    check_same_dims(ground_truth, prediction)
    d = VolumeValidator.validate_tolerance(d)
    validate_element(element)
    g_pts = np.argwhere(ground_truth.bits).astype(np.float64)
    s_pts = np.argwhere(prediction.bits).astype(np.float64)

    return report_from_ratios(
        precision_hits=_within(s_pts, g_pts, d, element),
        predicted=len(s_pts),
        recall_hits=_within(g_pts, s_pts, d, element),
        actual=len(g_pts),
        counts=confusion(ground_truth, prediction),
        tolerance=d,
    )
