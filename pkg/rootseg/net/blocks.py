"""Refinement blocks: residual conv units, chained residual pooling, fusion."""

import logging
from typing import Optional

import torch
import torch.nn.functional as F
from torch import nn

from rootseg.services.validators import ValidationError

logger = logging.getLogger(__name__)

CRP_STAGES = 2
CRP_KERNEL = 5


class ShapeError(ValidationError):
    """Raised when tensor or grid sizes violate the network's contract."""
    pass


def make_activation(name: str) -> nn.Module:
    if name == "relu":
        return nn.ReLU()
    if name == "silu":
        return nn.SiLU()
    raise ValueError(f"Unknown activation: {name}")


def conv3x3(in_channels: int, out_channels: int, bias: bool = True) -> nn.Conv2d:
    return nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=1, padding=1, bias=bias)


class ResidualConvUnit(nn.Module):
    def __init__(self, features: int, activation: str = "relu"):
        super().__init__()

        self.conv1 = conv3x3(features, features, bias=True)
        self.conv2 = conv3x3(features, features, bias=False)
        self.act = make_activation(activation)

    def forward(self, x):
        out = self.act(x)
        out = self.conv1(out)
        out = self.act(out)
        out = self.conv2(out)
        return out + x


class ChainedResidualPool(nn.Module):
    """Pool-conv stages at stride 1, each added back onto the running sum."""

    def __init__(self, features: int, activation: str = "relu", pool: str = "max"):
        super().__init__()

        self.act = make_activation(activation)
        if pool == "max":
            self.pool = nn.MaxPool2d(CRP_KERNEL, stride=1, padding=CRP_KERNEL // 2)
        elif pool == "avg":
            self.pool = nn.AvgPool2d(
                CRP_KERNEL, stride=1, padding=CRP_KERNEL // 2, count_include_pad=False
            )
        else:
            raise ValueError(f"Unknown pooling: {pool}")
        self.convs = nn.ModuleList(
            conv3x3(features, features, bias=False) for _ in range(CRP_STAGES)
        )

    def forward(self, x):
        x = self.act(x)
        path = x
        for conv in self.convs:
            path = conv(self.pool(path))
            x = x + path
        return x


class RefineBlock(nn.Module):
    """Fuse an optional coarser path with a lateral input at the lateral resolution.

    The coarser path runs through two residual units, is upsampled by 2
    (nearest neighbour) and convolved; the lateral path is adapted to
    ``features`` channels, runs through two residual units and is convolved.
    The sum passes chained residual pooling and a final residual unit.
    """

    def __init__(
        self,
        lateral_channels: int,
        features: int,
        has_coarser: bool = True,
        activation: str = "relu",
        pool: str = "max",
    ):
        super().__init__()

        self.adapt = conv3x3(lateral_channels, features)
        self.lateral_rcu = nn.Sequential(
            ResidualConvUnit(features, activation), ResidualConvUnit(features, activation)
        )
        self.lateral_conv = conv3x3(features, features)
        if has_coarser:
            self.coarser_rcu = nn.Sequential(
                ResidualConvUnit(features, activation), ResidualConvUnit(features, activation)
            )
            self.coarser_conv = conv3x3(features, features)
        else:
            self.coarser_rcu = None
            self.coarser_conv = None
        self.crp = ChainedResidualPool(features, activation, pool)
        self.output_rcu = ResidualConvUnit(features, activation)

    def forward(self, lateral, coarser: Optional[torch.Tensor] = None):
        out = self.lateral_conv(self.lateral_rcu(self.adapt(lateral)))

        if self.coarser_rcu is not None:
            if coarser is None:
                raise ShapeError("Refinement block expects a coarser input")
            h, w = lateral.shape[-2:]
            ch, cw = coarser.shape[-2:]
            if (2 * ch, 2 * cw) != (h, w):
                raise ShapeError(
                    f"Coarser input {ch}x{cw} is not half of lateral input {h}x{w}"
                )
            up = F.interpolate(self.coarser_rcu(coarser), scale_factor=2, mode="nearest")
            out = out + self.coarser_conv(up)
        elif coarser is not None:
            raise ShapeError("First refinement block takes no coarser input")

        return self.output_rcu(self.crp(out))


def refine_block(
    block: RefineBlock, coarser: Optional[torch.Tensor], lateral: torch.Tensor
) -> torch.Tensor:
    """Apply a refinement block; the output has the lateral input's resolution."""
    return block(lateral, coarser)
