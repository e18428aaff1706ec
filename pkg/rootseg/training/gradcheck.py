"""Finite-difference check of the network's backward pass.

Analytic gradients of the training loss are compared with central
differences on a random subset of parameter entries, in double precision.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from rootseg.config.pipeline import NetConfig
from rootseg.net.pca import pca_compress
from rootseg.net.refinenet import SegNet, build_network, window_tensors
from rootseg.training.loss import bce_loss
from rootseg.volume.core import LayerWindow, WINDOW_LAYERS

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 100
DEFAULT_STEP = 1e-5
DEFAULT_SIZE = 32
# Gradients below this magnitude are compared on an absolute scale.
GRADIENT_FLOOR = 1e-6


@dataclass(frozen=True)
class GradCheckResult:
    max_relative_error: float
    n_checked: int
    all_finite: bool


def tiny_config(seed: int = 0) -> NetConfig:
    """Smallest network that still exercises every layer kind."""
    return NetConfig(
        encoder_widths=(2, 2, 4, 4, 4),
        refine_width=4,
        activation="silu",
        crp_pool="avg",
        seed=seed,
    )


def _fixture(seed: int, size: int, degenerate: bool):
    rng = np.random.default_rng(seed)
    if degenerate:
        layers = np.zeros((WINDOW_LAYERS, size, size), dtype=np.float32)
        target = np.zeros((1, 2, 2 * size, 2 * size))
    else:
        layers = rng.random((WINDOW_LAYERS, size, size)).astype(np.float32)
        target = (rng.random((1, 2, 2 * size, 2 * size)) < 0.3).astype(np.float64)
    window = LayerWindow(layers=layers, center=2, sources=(0, 1, 2, 3, 4))
    raw, rgb = window_tensors(window, pca_compress(window), torch.float64)
    return raw.unsqueeze(0), rgb.unsqueeze(0), torch.from_numpy(target)


def run_grad_check(
    net_config: Optional[NetConfig] = None,
    seed: int = 0,
    n_samples: int = DEFAULT_SAMPLES,
    step: float = DEFAULT_STEP,
    size: int = DEFAULT_SIZE,
    degenerate: bool = False,
) -> GradCheckResult:
    """Compare analytic and central-difference gradients.

    Args:
        net_config: Network to check; a tiny smooth config by default
        seed: Seeds the weights, the fixture and the parameter subset
        n_samples: Parameter entries to check (all if fewer exist)
        step: Finite-difference step h
        size: Input height and width
        degenerate: Use an all-zero input and target

    Returns:
        Maximum of |a - n| / max(|a|, |n|, floor) over the checked entries
    """
    config = (net_config or tiny_config(seed)).model_copy(update={"seed": seed})
    net: SegNet = build_network(config, dtype=torch.float64)
    net.eval()
    raw, rgb, target = _fixture(seed, size, degenerate)

    def loss_value() -> torch.Tensor:
        return bce_loss(net(raw, rgb), target, from_logits=True)

    net.zero_grad()
    loss_value().backward()

    params = [p for p in net.parameters()]
    grads = [p.grad.detach().reshape(-1).clone() for p in params]
    all_finite = all(bool(torch.isfinite(g).all()) for g in grads)
    sizes = np.array([p.numel() for p in params])
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    rng = np.random.default_rng(seed)
    total = int(offsets[-1])
    picks = np.sort(rng.choice(total, size=min(n_samples, total), replace=False))

    worst = 0.0
    with torch.no_grad():
        for flat in picks:
            k = int(np.searchsorted(offsets, flat, side="right") - 1)
            i = int(flat - offsets[k])
            entry = params[k].view(-1)
            original = entry[i].item()

            entry[i] = original + step
            plus = loss_value().item()
            entry[i] = original - step
            minus = loss_value().item()
            entry[i] = original

            numeric = (plus - minus) / (2 * step)
            analytic = grads[k][i].item()
            denom = max(abs(analytic), abs(numeric), GRADIENT_FLOOR)
            worst = max(worst, abs(analytic - numeric) / denom)

    logger.info(f"Gradient check: {len(picks)} entries, max relative error {worst:.3e}")
    return GradCheckResult(max_relative_error=worst, n_checked=len(picks), all_finite=all_finite)


def grad_check(net_config: Optional[NetConfig] = None, seed: int = 0) -> float:
    """Maximum relative gradient error on a tiny double-precision network."""
    return run_grad_check(net_config, seed).max_relative_error
