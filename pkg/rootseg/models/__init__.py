"""Domain models package."""

from .domain import (
    Dims,
    RootNode,
    Transform,
    NoiseKind,
    NoiseSpec,
    Split,
    SampleMeta,
    ManifestEntry,
    DatasetManifest,
    ConfusionCounts,
    MetricReport,
    BinReport,
    SnrBinnedReport,
    EpochRecord,
    TrainHistory,
)

__all__ = [
    "Dims",
    "RootNode",
    "Transform",
    "NoiseKind",
    "NoiseSpec",
    "Split",
    "SampleMeta",
    "ManifestEntry",
    "DatasetManifest",
    "ConfusionCounts",
    "MetricReport",
    "BinReport",
    "SnrBinnedReport",
    "EpochRecord",
    "TrainHistory",
]
