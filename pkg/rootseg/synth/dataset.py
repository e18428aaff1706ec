"""Generation of input / ground-truth pairs and dataset manifests.

A pair is a pure function of (root model, config, seed): the seed draws the
augmentation, the noise specs and the target SNR. The ground truth is
voxelized at twice the input resolution from the same transformed model as
the input signal, so both are aligned by construction.

Dataset layout::

    <out>/manifest.jsonl                 header line, then one entry per sample
    <out>/effective_config.json
    <out>/pairs/<split>/<seed>.vol3      input volume
    <out>/pairs/<split>/<seed>.msk3      ground-truth mask
"""

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from rootseg.config.pipeline import (
    GridConfig,
    NoiseConfig,
    PipelineConfig,
    TransformRanges,
    config_hash,
)
from rootseg.config.settings import settings
from rootseg.models.domain import (
    DatasetManifest,
    ManifestEntry,
    NoiseSpec,
    SampleMeta,
    Split,
    Transform,
)
from rootseg.roots.model import RootSystem, apply_transform
from rootseg.roots.voxelize import voxelize_mask, voxelize_signal
from rootseg.synth.noise import sum_noise
from rootseg.synth.snr import SynthError, compose_sample, normalize_unit
from rootseg.volume.core import BinaryMask3D, DimensionError, Volume3D
from rootseg.volume.io import load_mask, load_volume, save_mask, save_volume

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
EFFECTIVE_CONFIG_NAME = "effective_config.json"
MODELS_INDEX_NAME = "models.json"

PathLike = Union[str, Path]


class DatasetError(SynthError):
    """Raised for dataset layout or manifest problems."""
    pass


class OutputDirectoryError(DatasetError):
    """Raised when the output directory cannot be written."""
    pass


@dataclass(frozen=True)
class SamplePair:
    """Input volume with its 2x ground truth and generation metadata."""

    input: Volume3D
    ground_truth: BinaryMask3D
    meta: SampleMeta

    def __post_init__(self):
        expected = self.input.dims.scaled(2)
        if self.ground_truth.dims != expected:
            raise DimensionError(
                f"Ground truth must be {expected} for input {self.input.dims}, "
                f"got {self.ground_truth.dims}"
            )


def draw_transform(
    rng: np.random.Generator, ranges: TransformRanges, grid: GridConfig
) -> Transform:
    """Draw a random augmentation about the grid center."""
    rotation = float(rng.uniform(0.0, 360.0)) if ranges.rotate else 0.0
    if ranges.arbitrary_axis:
        axis = rng.standard_normal(3)
        axis = tuple(float(c) for c in axis / np.linalg.norm(axis))
        mirror_axes = 3
    else:
        axis = (0.0, 0.0, 1.0)
        # Mirroring z would turn the plant upside down.
        mirror_axes = 2
    flips = rng.random(mirror_axes) < ranges.mirror_probability
    mirror = tuple(bool(f) for f in flips) + (False,) * (3 - mirror_axes)
    thickness = float(rng.uniform(*ranges.thickness_range))
    t = ranges.translation_range_mm
    translation = tuple(float(c) for c in rng.uniform(-t, t, 3)) if t > 0 else (0.0, 0.0, 0.0)

    return Transform(
        rotation_deg=rotation,
        rotation_axis=axis,
        mirror=mirror,
        translation=translation,
        thickness_scale=thickness,
        pivot=grid.center_mm,
    )


def draw_noise_specs(rng: np.random.Generator, noise: NoiseConfig) -> List[NoiseSpec]:
    """Draw between min_specs and max_specs noise specs from the templates."""
    count = int(rng.integers(noise.min_specs, noise.max_specs + 1))
    specs = []
    for _ in range(count):
        template = noise.templates[int(rng.integers(len(noise.templates)))]
        specs.append(
            NoiseSpec(
                kind=template.kind,
                amplitude=float(rng.uniform(*template.amplitude_range)),
                cell_size=float(rng.uniform(*template.cell_size_range)),
                octaves=list(template.octaves),
                seed=int(rng.integers(0, 2**63)),
            )
        )
    return specs


def draw_target_snr(rng: np.random.Generator, noise: NoiseConfig) -> float:
    """Log-uniform draw over the configured SNR range."""
    lo, hi = noise.snr_range
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def generate_pair(
    rs: RootSystem,
    config: PipelineConfig,
    seed: int,
    workers: Optional[int] = None,
) -> SamplePair:
    """Generate one sample pair; fully determined by (rs, config, seed).

    Raises:
        DegenerateSignalError: If the transformed roots leave no signal in the grid
    """
    rng = np.random.default_rng(seed)
    grid = config.grid
    transform = draw_transform(rng, config.transforms, grid)
    specs = draw_noise_specs(rng, config.noise)
    target = draw_target_snr(rng, config.noise)

    moved = apply_transform(rs, transform)
    ground_truth = voxelize_mask(
        moved, grid.dims.scaled(2), grid.voxel_size / 2, grid.origin, workers
    )
    signal = voxelize_signal(
        moved, grid.dims, grid.voxel_size, grid.supersample, grid.origin, workers
    )
    noise = sum_noise(specs, grid.dims)

    if np.any(noise.voxels != 0):
        composed = compose_sample(signal, noise, target)
        volume = composed.volume
        meta = SampleMeta(
            seed=seed,
            model_name=rs.name,
            transform=transform,
            noise_specs=specs,
            target_snr=target,
            measured_snr=composed.measured_snr,
            noise_scale=composed.noise_scale,
            norm_offset=composed.norm_offset,
            norm_scale=composed.norm_scale,
        )
    else:
        logger.debug(f"Seed {seed}: noise is identically zero, skipping SNR targeting")
        values, offset, scale = normalize_unit(signal.voxels.astype(np.float64))
        volume = Volume3D(values.astype(np.float32))
        meta = SampleMeta(
            seed=seed,
            model_name=rs.name,
            transform=transform,
            noise_specs=specs,
            target_snr=None,
            measured_snr=None,
            noise_scale=0.0,
            norm_offset=offset,
            norm_scale=scale,
        )

    return SamplePair(input=volume, ground_truth=ground_truth, meta=meta)


def split_seeds(config: PipelineConfig) -> List[Tuple[Split, int, int]]:
    """(split, seed, index within split) for every sample, train first.

    Train seeds are ``seed + i``; validation seeds start at
    ``seed + val_seed_offset`` so the two ranges never overlap.
    """
    ds = config.dataset
    jobs = [(Split.TRAIN, ds.seed + i, i) for i in range(ds.n_train)]
    jobs += [
        (Split.VALIDATION, ds.seed + ds.val_seed_offset + i, i)
        for i in range(ds.n_val)
    ]
    return jobs


def _pair_paths(split: Split, seed: int) -> Tuple[str, str]:
    stem = f"pairs/{split.value}/{seed}"
    return f"{stem}.vol3", f"{stem}.msk3"


def _generate_job(args) -> ManifestEntry:
    rs, config, split, seed, out_dir = args
    pair = generate_pair(rs, config, seed, workers=1)
    input_path, gt_path = _pair_paths(split, seed)
    save_volume(pair.input, out_dir / input_path)
    save_mask(pair.ground_truth, out_dir / gt_path)
    return ManifestEntry(
        split=split,
        seed=seed,
        input_path=input_path,
        ground_truth_path=gt_path,
        meta=pair.meta,
    )


def _prepare_output(out_dir: Path) -> None:
    try:
        for split in Split:
            (out_dir / "pairs" / split.value).mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputDirectoryError(f"Cannot write dataset to {out_dir}: {e}") from e


def generate_dataset(
    models: Sequence[RootSystem],
    config: PipelineConfig,
    out_dir: PathLike,
    workers: Optional[int] = None,
) -> DatasetManifest:
    """Generate all train and validation pairs and write the manifest.

    Sample i of a split uses root model ``models[i % len(models)]``.

    Args:
        models: Parsed root models (at least one)
        config: Pipeline config; dataset sizes and seeds come from ``config.dataset``
        out_dir: Dataset directory
        workers: Worker processes; defaults to settings

    Raises:
        DatasetError: If no model is given
        OutputDirectoryError: If out_dir cannot be written
    """
    if not models:
        raise DatasetError("At least one root model is required")
    out_dir = Path(out_dir)
    workers = workers or settings.workers
    _prepare_output(out_dir)

    jobs = [
        (models[index % len(models)], config, split, seed, out_dir)
        for split, seed, index in split_seeds(config)
    ]
    logger.info(
        f"Generating {config.dataset.n_train} train + {config.dataset.n_val} validation pairs "
        f"into {out_dir} with {workers} worker(s)"
    )

    try:
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                entries = list(executor.map(_generate_job, jobs))
        else:
            entries = [_generate_job(job) for job in jobs]
    except PermissionError as e:
        raise OutputDirectoryError(f"Cannot write dataset to {out_dir}: {e}") from e

    manifest = DatasetManifest(
        config_hash=config_hash(config),
        config=config.model_dump(mode="json"),
        entries=entries,
    )
    write_manifest(manifest, out_dir)
    (out_dir / EFFECTIVE_CONFIG_NAME).write_text(
        json.dumps(manifest.config, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    logger.info(f"Wrote {len(entries)} pairs, manifest hash {manifest_hash(out_dir)[:12]}")
    return manifest


def write_manifest(manifest: DatasetManifest, out_dir: PathLike) -> Path:
    """Write the JSON-lines manifest: a header record, then one line per entry."""
    path = Path(out_dir) / MANIFEST_NAME
    header = {"config_hash": manifest.config_hash, "config": manifest.config}
    lines = [json.dumps(header, sort_keys=True)]
    lines += [json.dumps(e.to_dict(), sort_keys=True) for e in manifest.entries]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_manifest(dataset_dir: PathLike) -> DatasetManifest:
    """Read ``manifest.jsonl`` from a dataset directory.

    Raises:
        FileNotFoundError: If the manifest does not exist
        DatasetError: If the manifest is malformed
    """
    path = Path(dataset_dir) / MANIFEST_NAME
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not lines:
        raise DatasetError(f"{path}: empty manifest")
    try:
        header = json.loads(lines[0])
        entries = [ManifestEntry.from_dict(json.loads(line)) for line in lines[1:]]
        return DatasetManifest(
            config_hash=header["config_hash"], config=header.get("config", {}), entries=entries
        )
    except (ValueError, KeyError) as e:
        raise DatasetError(f"{path}: malformed manifest: {e}") from e


def manifest_hash(dataset_dir: PathLike) -> str:
    """SHA-256 of the manifest file bytes."""
    return hashlib.sha256((Path(dataset_dir) / MANIFEST_NAME).read_bytes()).hexdigest()


def load_pair(dataset_dir: PathLike, entry: ManifestEntry) -> SamplePair:
    """Load the files of one manifest entry."""
    root = Path(dataset_dir)
    return SamplePair(
        input=load_volume(root / entry.input_path),
        ground_truth=load_mask(root / entry.ground_truth_path),
        meta=entry.meta,
    )


def write_models_index(paths: Iterable[PathLike], out_dir: PathLike) -> Path:
    """Record the SHA-256 of every root model file used for generation."""
    index = {
        str(p): hashlib.sha256(Path(p).read_bytes()).hexdigest() for p in paths
    }
    path = Path(out_dir) / MODELS_INDEX_NAME
    path.write_text(json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
