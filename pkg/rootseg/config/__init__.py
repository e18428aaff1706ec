"""Configuration package for rootseg."""

from .settings import settings
from .pipeline import (
    ConfigError,
    GridConfig,
    TransformRanges,
    NoiseTemplate,
    NoiseConfig,
    DatasetConfig,
    NetConfig,
    TrainConfig,
    EvalConfig,
    PipelineConfig,
    load_config,
    apply_overrides,
    canonical_json,
    config_hash,
)

__all__ = [
    "settings",
    "ConfigError",
    "GridConfig",
    "TransformRanges",
    "NoiseTemplate",
    "NoiseConfig",
    "DatasetConfig",
    "NetConfig",
    "TrainConfig",
    "EvalConfig",
    "PipelineConfig",
    "load_config",
    "apply_overrides",
    "canonical_json",
    "config_hash",
]
