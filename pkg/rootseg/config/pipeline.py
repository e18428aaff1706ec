"""Declarative pipeline configuration.

A TOML file describes the sampling grid, augmentation ranges, noise pool,
dataset sizes, network widths, the training recipe and evaluation flags.
Every section has defaults, so an empty file is a valid config. Command-line
overrides address keys with dotted paths (``train.epochs=1``).
"""

import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, ValidationError as PydanticValidationError, model_validator

from rootseg.models.domain import Dims, NoiseKind, Vec3
from rootseg.services.validators import ValidationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)


class ConfigError(ValidationError):
    """Raised when a config file or override is invalid."""
    pass


class GridConfig(BaseModel):
    """Sampling grid at input (low) resolution.

    The ground truth is voxelized on the same extent at twice the resolution.
    """
    dims: Dims = Field(default_factory=lambda: Dims(x=32, y=32, z=16))
    voxel_size: float = Field(default=0.5, gt=0)
    origin: Vec3 = (0.0, 0.0, 0.0)
    supersample: int = Field(default=4, ge=1)

    @property
    def extent_mm(self) -> Vec3:
        return (
            self.dims.x * self.voxel_size,
            self.dims.y * self.voxel_size,
            self.dims.z * self.voxel_size,
        )

    @property
    def center_mm(self) -> Vec3:
        ex, ey, ez = self.extent_mm
        ox, oy, oz = self.origin
        return (ox + ex / 2, oy + ey / 2, oz + ez / 2)


class TransformRanges(BaseModel):
    """Ranges from which per-sample augmentations are drawn."""
    rotate: bool = True
    arbitrary_axis: bool = False
    mirror_probability: float = Field(default=0.5, ge=0, le=1)
    thickness_range: Tuple[float, float] = (0.8, 1.5)
    translation_range_mm: float = Field(default=0.0, ge=0)

    @model_validator(mode='after')
    def thickness_ordered(self) -> "TransformRanges":
        lo, hi = self.thickness_range
        if not 0 < lo <= hi:
            raise ValueError(
                f"thickness_range must satisfy 0 < lo <= hi, got {self.thickness_range}"
            )
        return self


class NoiseTemplate(BaseModel):
    """Template for drawing one NoiseSpec."""
    kind: NoiseKind
    amplitude_range: Tuple[float, float] = (0.5, 1.0)
    cell_size_range: Tuple[float, float] = (4.0, 8.0)
    octaves: List[float] = Field(default_factory=lambda: [1.0, 0.5, 0.25])

    @model_validator(mode='after')
    def ranges_ordered(self) -> "NoiseTemplate":
        for name in ("amplitude_range", "cell_size_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi, got {(lo, hi)}")
        if self.cell_size_range[0] < 1:
            raise ValueError("cell_size_range must not go below 1 voxel")
        return self


def _default_templates() -> List[NoiseTemplate]:
    return [
        NoiseTemplate(kind=NoiseKind.PERLIN),
        NoiseTemplate(kind=NoiseKind.UNIFORM, octaves=[1.0]),
        NoiseTemplate(kind=NoiseKind.GAUSSIAN, octaves=[1.0]),
    ]


class NoiseConfig(BaseModel):
    """Soil noise pool and SNR targeting."""
    templates: List[NoiseTemplate] = Field(default_factory=_default_templates)
    min_specs: int = Field(default=1, ge=1)
    max_specs: int = Field(default=3, ge=1)
    snr_range: Tuple[float, float] = (1.0, 100.0)

    @model_validator(mode='after')
    def counts_ordered(self) -> "NoiseConfig":
        if self.min_specs > self.max_specs:
            raise ValueError("min_specs must not exceed max_specs")
        if not self.templates:
            raise ValueError("At least one noise template is required")
        lo, hi = self.snr_range
        if not 0 < lo <= hi:
            raise ValueError(f"snr_range must satisfy 0 < lo <= hi, got {self.snr_range}")
        return self


class DatasetConfig(BaseModel):
    """Dataset sizes, seeds and root model sources."""
    n_train: int = Field(default=384, ge=0)
    n_val: int = Field(default=384, ge=0)
    seed: int = Field(default=0, ge=0)
    val_seed_offset: int = Field(default=1_000_000, ge=1)
    models: List[str] = Field(default_factory=list)

    @model_validator(mode='after')
    def seed_ranges_disjoint(self) -> "DatasetConfig":
        if self.n_train > self.val_seed_offset:
            raise ValueError(
                f"n_train ({self.n_train}) exceeds val_seed_offset ({self.val_seed_offset}); "
                "train and validation seeds would overlap"
            )
        return self


class NetConfig(BaseModel):
    """Network widths and layer options."""
    encoder_widths: Tuple[int, int, int, int, int] = (16, 32, 64, 128, 256)
    refine_width: int = Field(default=32, ge=1)
    input_layers: Literal[5] = 5
    scale_factor: Literal[2] = 2
    activation: Literal["relu", "silu"] = "relu"
    crp_pool: Literal["max", "avg"] = "max"
    pca_per_window: bool = True
    seed: int = Field(default=0, ge=0)

    @model_validator(mode='after')
    def widths_positive(self) -> "NetConfig":
        if any(w < 1 for w in self.encoder_widths):
            raise ValueError(f"encoder_widths must be >= 1, got {self.encoder_widths}")
        return self


class TrainConfig(BaseModel):
    """Optimization recipe. Defaults follow the reference training run."""
    epochs: int = Field(default=100, ge=1)
    lr: float = Field(default=6e-4, ge=0)
    clip: float = Field(default=0.01, gt=0)
    batch_size: int = Field(default=4, ge=1)
    seed: int = Field(default=0, ge=0)
    loss: Literal["bce"] = "bce"
    pos_weight: float = Field(default=1.0, gt=0)
    optimizer: Literal["sgd", "adam"] = "sgd"
    validate_every: int = Field(default=1, ge=0)
    threshold: float = Field(default=0.5, ge=0, le=1)


class EvalConfig(BaseModel):
    """Evaluation flags."""
    threshold: float = Field(default=0.5, ge=0, le=1)
    structuring_element: Literal["ball", "cube"] = "ball"
    tolerance: int = Field(default=0, ge=0)
    curve_max: Optional[int] = Field(default=None, ge=0)


class PipelineConfig(BaseModel):
    """Root of the declarative configuration."""
    grid: GridConfig = Field(default_factory=GridConfig)
    transforms: TransformRanges = Field(default_factory=TransformRanges)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    net: NetConfig = Field(default_factory=NetConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)


def _validate(model_cls, data: dict, source: str):
    try:
        return model_cls.model_validate(data)
    except PydanticValidationError as e:
        raise ConfigError(f"Invalid config in {source}: {e}") from e


def load_config(path: Optional[Union[str, Path]] = None) -> PipelineConfig:
    """Load a pipeline config from a TOML file.

    Args:
        path: TOML file; None yields the defaults

    Returns:
        The validated config

    Raises:
        ConfigError: If the file is malformed or fails validation
        FileNotFoundError: If the file does not exist
    """
    if path is None:
        return PipelineConfig()

    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Malformed TOML in {path}: {e}") from e

    config = _validate(PipelineConfig, data, str(path))
    logger.debug(f"Loaded config from {path}")
    return config


def _parse_value(raw: str):
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def apply_overrides(config: PipelineConfig, overrides: List[str]) -> PipelineConfig:
    """Apply ``section.key=value`` overrides.

    Args:
        config: Base config
        overrides: Override strings; values are parsed as TOML literals

    Returns:
        A new validated config

    Raises:
        ConfigError: If an override is malformed or names an unknown key
    """
    data = config.model_dump(mode="json")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"Override must look like key=value, got {item!r}")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise ConfigError(f"Unknown config key: {key}")
            node = node[part]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise ConfigError(f"Unknown config key: {key}")
        node[parts[-1]] = _parse_value(raw.strip())
        logger.debug(f"Override {key} = {node[parts[-1]]!r}")

    return _validate(PipelineConfig, data, "overrides")


def canonical_json(model: BaseModel) -> str:
    """Serialize a model as sorted-key JSON."""
    return json.dumps(model.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def config_hash(model: BaseModel) -> str:
    """SHA-256 of the canonical JSON form of a config model."""
    return hashlib.sha256(canonical_json(model).encode("utf-8")).hexdigest()
