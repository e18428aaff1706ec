"""Domain models for the segmentation pipeline.

These Pydantic models define the serializable metadata that flows between
stages: grid dimensions, root geometry, augmentation transforms, noise
specifications, dataset manifests, metric reports and training history.
Dense voxel payloads live in ``rootseg.volume.core`` instead.
"""

import math
from enum import Enum
from typing import Optional, List, Dict, Tuple
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Vec3 = Tuple[float, float, float]


class Dims(BaseModel):
    """Voxel counts of a regular 3D grid.

    Attributes:
        x: Voxels along x
        y: Voxels along y
        z: Voxels along z (the root's top-to-bottom axis)
    """
    model_config = ConfigDict(frozen=True)

    x: int = Field(..., gt=0)
    y: int = Field(..., gt=0)
    z: int = Field(..., gt=0)

    @property
    def shape(self) -> Tuple[int, int, int]:
        """Array shape in storage order (z, y, x)."""
        return (self.z, self.y, self.x)

    @classmethod
    def from_shape(cls, shape: Tuple[int, ...]) -> "Dims":
        """Create dims from a (z, y, x) array shape."""
        z, y, x = shape
        return cls(x=int(x), y=int(y), z=int(z))

    def scaled(self, k: int) -> "Dims":
        """Return the dims multiplied by k on every axis."""
        return Dims(x=self.x * k, y=self.y * k, z=self.z * k)

    def __str__(self) -> str:
        return f"{self.x}x{self.y}x{self.z}"


class RootNode(BaseModel):
    """A node of a root structural model.

    Attributes:
        position: (x, y, z) in millimeters
        radius: Root radius at this node in millimeters
    """
    model_config = ConfigDict(frozen=True)

    position: Vec3
    radius: float = Field(..., gt=0)

    @field_validator('position')
    @classmethod
    def position_finite(cls, v: Vec3) -> Vec3:
        """Ensure all coordinates are finite."""
        if not all(math.isfinite(c) for c in v):
            raise ValueError(f"Node coordinates must be finite, got {v}")
        return v


class Transform(BaseModel):
    """Geometric augmentation applied to a root system.

    Positions are mapped as ``R · M · (p - pivot) + pivot + translation``
    where M mirrors the flagged axes and R rotates about ``rotation_axis``.

    Attributes:
        rotation_deg: Rotation angle in degrees
        rotation_axis: Rotation axis (normalized on use), z by default
        mirror: Mirror flags for (x, y, z)
        translation: Offset in millimeters
        thickness_scale: Factor applied to every radius
        pivot: Center of rotation and mirroring in millimeters
    """
    model_config = ConfigDict(frozen=True)

    rotation_deg: float = 0.0
    rotation_axis: Vec3 = (0.0, 0.0, 1.0)
    mirror: Tuple[bool, bool, bool] = (False, False, False)
    translation: Vec3 = (0.0, 0.0, 0.0)
    thickness_scale: float = Field(default=1.0, gt=0)
    pivot: Vec3 = (0.0, 0.0, 0.0)

    @field_validator('rotation_axis')
    @classmethod
    def axis_nonzero(cls, v: Vec3) -> Vec3:
        """Reject a zero-length rotation axis."""
        if math.sqrt(sum(c * c for c in v)) == 0.0:
            raise ValueError("Rotation axis must be non-zero")
        return v

    @classmethod
    def identity(cls) -> "Transform":
        return cls()


class NoiseKind(str, Enum):
    """Kinds of synthetic soil noise."""
    PERLIN = "perlin"
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"


class NoiseSpec(BaseModel):
    """Parameters of one synthetic noise field.

    Attributes:
        kind: perlin, uniform or gaussian
        amplitude: Overall amplitude (std for gaussian, upper bound for uniform)
        cell_size: Lattice cell size in voxels of the first Perlin octave
        octaves: Per-octave amplitudes; octave k uses cell_size / 2**k, at least 2 voxels
        seed: 64-bit seed
    """
    model_config = ConfigDict(frozen=True)

    kind: NoiseKind
    amplitude: float = Field(..., ge=0)
    cell_size: float = Field(default=8.0, ge=1)
    octaves: List[float] = Field(default_factory=lambda: [1.0])
    seed: int = Field(default=0, ge=0, lt=2**64)

    @field_validator('octaves')
    @classmethod
    def octaves_nonempty(cls, v: List[float]) -> List[float]:
        """Ensure at least one non-negative octave amplitude."""
        if not v:
            raise ValueError("At least one octave amplitude is required")
        if any(a < 0 for a in v):
            raise ValueError(f"Octave amplitudes must be non-negative, got {v}")
        return v


class Split(str, Enum):
    """Dataset split tags."""
    TRAIN = "train"
    VALIDATION = "validation"


class SampleMeta(BaseModel):
    """Metadata of one generated input / ground-truth pair.

    Attributes:
        seed: Seed that fully determines the pair
        model_name: Root model the pair was drawn from
        transform: Augmentation applied to the root model
        noise_specs: Noise fields summed into the composite
        target_snr: Drawn target SNR (None for noiseless samples)
        measured_snr: SNR measured on the composite (None for noiseless samples)
        noise_scale: Factor applied to the summed noise to reach the target
        norm_offset: Minimum subtracted during [0,1] normalization
        norm_scale: Divisor applied during [0,1] normalization
    """
    seed: int = Field(..., ge=0)
    model_name: str = ""
    transform: Transform = Field(default_factory=Transform)
    noise_specs: List[NoiseSpec] = Field(default_factory=list)
    target_snr: Optional[float] = Field(default=None, gt=0)
    measured_snr: Optional[float] = Field(default=None, gt=0)
    noise_scale: float = Field(default=1.0, ge=0)
    norm_offset: float = 0.0
    norm_scale: float = Field(default=1.0, gt=0)


class ManifestEntry(BaseModel):
    """One sample listed in a dataset manifest.

    Paths are relative to the dataset directory.
    """
    split: Split
    seed: int = Field(..., ge=0)
    input_path: str
    ground_truth_path: str
    meta: SampleMeta

    def to_dict(self) -> dict:
        """Convert entry to a JSON-compatible dictionary."""
        return self.model_dump(mode="json")

    @classmethod
    def from_dict(cls, data: dict) -> "ManifestEntry":
        """Create entry from dictionary."""
        return cls.model_validate(data)


class DatasetManifest(BaseModel):
    """Index of a generated dataset.

    Attributes:
        config_hash: Hash of the generation config
        config: Effective generation config (for regeneration)
        entries: All samples of both splits, train first
    """
    config_hash: str
    config: dict = Field(default_factory=dict)
    entries: List[ManifestEntry] = Field(default_factory=list)

    @model_validator(mode='after')
    def entries_consistent(self) -> "DatasetManifest":
        """Ensure no path is listed twice and split seeds never overlap."""
        paths: set = set()
        for entry in self.entries:
            for path in (entry.input_path, entry.ground_truth_path):
                if path in paths:
                    raise ValueError(f"Path listed twice in manifest: {path}")
                paths.add(path)
        train_seeds = {e.seed for e in self.entries if e.split == Split.TRAIN}
        val_seeds = {e.seed for e in self.entries if e.split == Split.VALIDATION}
        overlap = train_seeds & val_seeds
        if overlap:
            raise ValueError(f"Train/validation seeds overlap: {sorted(overlap)[:5]}")
        return self

    def split(self, split: Split) -> List[ManifestEntry]:
        """Return the entries of one split."""
        return [e for e in self.entries if e.split == split]


class ConfusionCounts(BaseModel):
    """Voxelwise confusion counts of a binary segmentation."""
    model_config = ConfigDict(frozen=True)

    tp: int = Field(..., ge=0)
    fp: int = Field(..., ge=0)
    fn: int = Field(..., ge=0)
    tn: int = Field(..., ge=0)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            tn=self.tn + other.tn,
        )

    @classmethod
    def zero(cls) -> "ConfusionCounts":
        return cls(tp=0, fp=0, fn=0, tn=0)


class MetricReport(BaseModel):
    """Precision / recall / F1 at a given distance tolerance.

    Attributes:
        precision: Precision (tolerant precision p' when tolerance > 0)
        recall: Recall (tolerant recall r' when tolerance > 0)
        f1: 2pr/(p+r), or 0 when p+r == 0
        counts: Standard confusion counts of the pair
        tolerance: Distance tolerance d in voxels (0 for standard metrics)
        degenerate: True when any denominator was zero
    """
    model_config = ConfigDict(frozen=True)

    precision: float = Field(..., ge=0, le=1)
    recall: float = Field(..., ge=0, le=1)
    f1: float = Field(..., ge=0, le=1)
    counts: ConfusionCounts
    tolerance: int = Field(default=0, ge=0)
    degenerate: bool = False

    def to_row(self) -> dict:
        """Flatten into a single CSV row."""
        return {
            "tolerance": self.tolerance,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.counts.tp,
            "fp": self.counts.fp,
            "fn": self.counts.fn,
            "tn": self.counts.tn,
            "degenerate": self.degenerate,
        }


class BinReport(BaseModel):
    """Pooled metrics of all samples falling into one SNR bin.

    Attributes:
        label: Bin label, e.g. "[1,3.16)", or "below" / "above"
        report: Metrics on the pooled (micro-averaged) counts
        n_samples: Samples that fell into the bin
        macro_f1: Mean of the per-sample F1 values in the bin
    """
    label: str
    report: MetricReport
    n_samples: int = Field(..., ge=1)
    macro_f1: float = Field(..., ge=0, le=1)


class SnrBinnedReport(BaseModel):
    """Metrics broken down by SNR bin plus the pooled overall result."""
    bins: List[BinReport] = Field(default_factory=list)
    overall: MetricReport
    mean_sample_f1: float = Field(..., ge=0, le=1)
    n_samples: int = Field(..., ge=1)

    def bin(self, label: str) -> Optional[BinReport]:
        """Return the report of one bin if it is occupied."""
        for b in self.bins:
            if b.label == label:
                return b
        return None

    def f1_by_bin(self) -> Dict[str, float]:
        return {b.label: b.report.f1 for b in self.bins}


class EpochRecord(BaseModel):
    """Training statistics of one completed epoch."""
    epoch: int = Field(..., ge=1)
    train_loss: float
    val_loss: Optional[float] = None
    val_f1: Optional[float] = None
    bin_f1: Dict[str, float] = Field(default_factory=dict)


class TrainHistory(BaseModel):
    """Per-epoch training history."""
    records: List[EpochRecord] = Field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: EpochRecord) -> None:
        """Add the record of a completed epoch."""
        if record.epoch != len(self.records) + 1:
            raise ValueError(
                f"Expected record for epoch {len(self.records) + 1}, got {record.epoch}"
            )
        self.records.append(record)

    def to_rows(self, bin_labels: List[str]) -> List[dict]:
        """Flatten into CSV rows with one F1 column per SNR bin."""
        rows = []
        for r in self.records:
            row = {
                "epoch": r.epoch,
                "train_loss": r.train_loss,
                "val_loss": r.val_loss,
                "val_f1": r.val_f1,
            }
            for label in bin_labels:
                row[f"f1_{label}"] = r.bin_f1.get(label)
            rows.append(row)
        return rows
