"""Binary cross-entropy loss and global-norm gradient clipping."""

import logging
from typing import List, Optional, Sequence, Union

import numpy as np
import torch
import torch.nn.functional as F

from rootseg.net.blocks import ShapeError
from rootseg.net.refinenet import PredictionPair

logger = logging.getLogger(__name__)

EPS = 1e-7
LOGIT_LIMIT = 30.0

TensorLike = Union[torch.Tensor, np.ndarray, PredictionPair]


def _as_tensor(x: TensorLike) -> torch.Tensor:
    if isinstance(x, PredictionPair):
        x = x.stacked()
    if isinstance(x, np.ndarray):
        return torch.from_numpy(np.asarray(x, dtype=np.float64))
    return x


def bce_loss(
    pred: TensorLike,
    target: TensorLike,
    from_logits: bool = False,
    pos_weight: float = 1.0,
) -> torch.Tensor:
    """Mean binary cross-entropy over every voxel of both output layers.

    Args:
        pred: Confidences in [0, 1], or logits when ``from_logits``
        target: Ground-truth bits, same shape
        from_logits: Interpret pred as logits
        pos_weight: Weight of the positive (root) term

    Raises:
        ShapeError: If the shapes differ
    """
    pred, target = _as_tensor(pred), _as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"Prediction shape {tuple(pred.shape)} != target {tuple(target.shape)}")
    target = target.to(pred.dtype)

    if from_logits:
        logits = pred.clamp(-LOGIT_LIMIT, LOGIT_LIMIT)
        weight = torch.tensor(pos_weight, dtype=pred.dtype) if pos_weight != 1.0 else None
        return F.binary_cross_entropy_with_logits(logits, target, pos_weight=weight)

    p = pred.clamp(EPS, 1.0 - EPS)
    losses = -(pos_weight * target * torch.log(p) + (1.0 - target) * torch.log1p(-p))
    return losses.mean()


def global_norm(grads: Sequence[Optional[torch.Tensor]]) -> float:
    present = [g for g in grads if g is not None]
    if not present:
        return 0.0
    return float(torch.sqrt(sum(torch.sum(g.double() ** 2) for g in present)))


def clip_gradients(
    grads: Sequence[Optional[torch.Tensor]], c: float
) -> List[Optional[torch.Tensor]]:
    """Scale all gradients by c / norm when their global L2 norm exceeds c.

    Gradients at or below the threshold (including all-zero ones) come back
    unchanged. Direction is always preserved.
    """
    if c <= 0:
        raise ValueError(f"Clip threshold must be positive, got {c}")
    norm = global_norm(grads)
    if norm <= c:
        return list(grads)
    scale = c / norm
    return [None if g is None else g * scale for g in grads]
