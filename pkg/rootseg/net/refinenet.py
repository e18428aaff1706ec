"""Layer-wise super-resolution segmentation network.

A five-stage residual encoder reads the RGB encoding of a 5-layer window.
Seven refinement blocks climb back up: blocks 1-5 take the encoder stages
from 1/32 to 1/2 resolution, block 6 fuses the raw window at input
resolution and block 7 the nearest-upsampled raw window at 2x. A 1x1 head
produces two channels, read as output layers 2i and 2i+1.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from rootseg.config.pipeline import NetConfig
from rootseg.net.blocks import (
    RefineBlock,
    ResidualConvUnit,
    ShapeError,
    make_activation,
    refine_block,
)
from rootseg.net.pca import PcaBasis, RgbEncoding, pca_compress
from rootseg.services.validators import ValidationError
from rootseg.volume.core import WINDOW_LAYERS, LayerWindow

logger = logging.getLogger(__name__)

ENCODER_STAGES = 5
SIZE_MULTIPLE = 2**ENCODER_STAGES
OUTPUT_CHANNELS = 2


def check_divisible(height: int, width: int) -> None:
    """Reject sizes the encoder cannot halve five times.

    Raises:
        ShapeError: With the nearest valid size in the message
    """
    bad = [(name, n) for name, n in (("x", width), ("y", height)) if n % SIZE_MULTIPLE]
    if bad:
        hints = ", ".join(
            f"{name}={n} -> {nearest_valid(n)}" for name, n in bad
        )
        raise ShapeError(
            f"Input x and y must be divisible by {SIZE_MULTIPLE}; got {width}x{height} "
            f"(pad or crop to the nearest valid size: {hints})"
        )


def nearest_valid(n: int) -> int:
    """Closest positive multiple of 32."""
    return max(SIZE_MULTIPLE, int(round(n / SIZE_MULTIPLE)) * SIZE_MULTIPLE)


class EncoderStage(nn.Module):
    """Stride-2 convolution followed by a residual unit."""

    def __init__(self, in_channels: int, out_channels: int, activation: str):
        super().__init__()

        self.down = nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=2, padding=1)
        self.act = make_activation(activation)
        self.rcu = ResidualConvUnit(out_channels, activation)

    def forward(self, x):
        return self.rcu(self.act(self.down(x)))


class Encoder(nn.Module):
    def __init__(self, widths: Sequence[int], activation: str = "relu"):
        super().__init__()

        channels = [3] + list(widths)
        self.stages = nn.ModuleList(
            EncoderStage(channels[i], channels[i + 1], activation) for i in range(ENCODER_STAGES)
        )

    def forward(self, rgb) -> List[torch.Tensor]:
        h, w = rgb.shape[-2:]
        check_divisible(h, w)
        features = []
        x = rgb
        for stage in self.stages:
            x = stage(x)
            features.append(x)
        return features


class SegNet(nn.Module):
    """Encoder, seven refinement blocks and a two-channel 1x1 head.

    ``forward`` returns logits of shape (batch, 2, 2h, 2w).
    """

    def __init__(self, config: NetConfig):
        super().__init__()

        self.config = config
        widths = list(config.encoder_widths)
        f = config.refine_width
        act, pool = config.activation, config.crp_pool

        self.encoder = Encoder(widths, act)
        coarse_to_fine = widths[::-1]
        blocks = [RefineBlock(coarse_to_fine[0], f, has_coarser=False, activation=act, pool=pool)]
        blocks += [RefineBlock(w, f, activation=act, pool=pool) for w in coarse_to_fine[1:]]
        blocks.append(RefineBlock(WINDOW_LAYERS, f, activation=act, pool=pool))
        blocks.append(RefineBlock(WINDOW_LAYERS, f, activation=act, pool=pool))
        self.blocks = nn.ModuleList(blocks)

        self.head = nn.Conv2d(f, OUTPUT_CHANNELS, kernel_size=1)
        nn.init.zeros_(self.head.bias)

    def forward(self, raw, rgb):
        """Args: raw (b, 5, h, w) window layers; rgb (b, 3, h, w) encoding."""
        features = self.encoder(rgb)
        laterals = features[::-1] + [raw, F.interpolate(raw, scale_factor=2, mode="nearest")]

        x = None
        for block, lateral in zip(self.blocks, laterals):
            x = refine_block(block, x, lateral)
        return self.head(x)


def build_network(config: NetConfig, dtype: torch.dtype = torch.float32) -> SegNet:
    """Create a network with weights drawn from ``config.seed``.

    The global torch RNG state is left untouched.
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        net = SegNet(config)
    net = net.to(dtype)
    n_params = sum(p.numel() for p in net.parameters())
    logger.debug(f"Built network with {n_params} parameters (seed {config.seed})")
    return net


def network_dtype(net: nn.Module) -> torch.dtype:
    return next(net.parameters()).dtype


@dataclass(frozen=True)
class PredictionPair:
    """Confidence maps in [0, 1] for output layers 2i (upper) and 2i+1 (lower)."""

    upper: np.ndarray
    lower: np.ndarray

    def __post_init__(self):
        if self.upper.shape != self.lower.shape or self.upper.ndim != 2:
            raise ShapeError(
                f"Prediction maps must be two equal 2D arrays, got "
                f"{self.upper.shape} and {self.lower.shape}"
            )
        for m in (self.upper, self.lower):
            if not np.all((m >= 0) & (m <= 1)):
                raise ShapeError("Prediction confidences must lie in [0, 1]")

    def stacked(self) -> np.ndarray:
        return np.stack([self.upper, self.lower])


def window_tensors(
    window: LayerWindow,
    rgb: Optional[RgbEncoding] = None,
    dtype: torch.dtype = torch.float32,
):
    """(raw, rgb) tensors of shape (5, h, w) and (3, h, w) for one window."""
    if rgb is None:
        rgb = pca_compress(window)
    raw = torch.from_numpy(np.array(window.layers)).to(dtype)
    return raw, torch.from_numpy(np.array(rgb.channels)).to(dtype)


def encoder_forward(rgb: RgbEncoding, net: SegNet) -> List[torch.Tensor]:
    """Feature pyramid at 1/2 .. 1/32 of the encoding's resolution.

    Raises:
        ShapeError: If height or width is not divisible by 32
    """
    x = torch.from_numpy(np.array(rgb.channels)).to(network_dtype(net)).unsqueeze(0)
    with torch.no_grad():
        return [f.squeeze(0) for f in net.encoder(x)]


def forward(
    window: LayerWindow, net: SegNet, basis: Optional[PcaBasis] = None
) -> PredictionPair:
    """Predict the two output layers of one window.

    Networks configured with ``pca_per_window = false`` encode every window
    with one basis fitted on the whole volume (``fit_volume_pca``), which
    must then be passed as ``basis``.

    Raises:
        ShapeError: If the window size is not divisible by 32
        ValidationError: If the network needs a volume basis and none is given
    """
    check_divisible(window.height, window.width)
    if basis is None and not net.config.pca_per_window:
        raise ValidationError(
            "Network encodes windows with a volume-wide PCA basis; pass fit_volume_pca(volume)"
        )
    raw, rgb = window_tensors(window, pca_compress(window, basis), network_dtype(net))
    with torch.no_grad():
        conf = torch.sigmoid(net(raw.unsqueeze(0), rgb.unsqueeze(0)))[0]
    conf = conf.to(torch.float32).numpy()
    return PredictionPair(upper=conf[0], lower=conf[1])
