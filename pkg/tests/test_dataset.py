import json

import numpy as np
import pytest

from rootseg.models.domain import Split
from rootseg.roots.voxelize import voxelize_signal
from rootseg.synth.dataset import (
    MANIFEST_NAME,
    DatasetError,
    generate_dataset,
    generate_pair,
    load_manifest,
    load_pair,
    manifest_hash,
    split_seeds,
    write_models_index,
)
from rootseg.synth.snr import normalize_unit
from rootseg.volume.io import mask_to_bytes, volume_to_bytes


def test_pair_is_deterministic(tap_root, tiny_pipeline):
    a = generate_pair(tap_root, tiny_pipeline, seed=7, workers=1)
    b = generate_pair(tap_root, tiny_pipeline, seed=7, workers=1)
    assert volume_to_bytes(a.input) == volume_to_bytes(b.input)
    assert mask_to_bytes(a.ground_truth) == mask_to_bytes(b.ground_truth)
    assert a.meta == b.meta


def test_seeds_differ(tap_root, tiny_pipeline):
    a = generate_pair(tap_root, tiny_pipeline, seed=1, workers=1)
    b = generate_pair(tap_root, tiny_pipeline, seed=2, workers=1)
    assert a.input != b.input


def test_ground_truth_has_twice_the_resolution(tap_root, tiny_pipeline):
    pair = generate_pair(tap_root, tiny_pipeline, seed=0, workers=1)
    assert pair.ground_truth.dims == pair.input.dims.scaled(2)
    assert pair.ground_truth.count() > 0
    assert 0.0 <= pair.input.voxels.min() and pair.input.voxels.max() <= 1.0


def test_measured_snr_matches_target(tap_root, tiny_pipeline):
    meta = generate_pair(tap_root, tiny_pipeline, seed=4, workers=1).meta
    assert meta.measured_snr == pytest.approx(meta.target_snr, rel=0.01)


def test_noiseless_pair_is_normalized_signal(tap_root, noiseless_pipeline):
    grid = noiseless_pipeline.grid
    pair = generate_pair(tap_root, noiseless_pipeline, seed=0, workers=1)
    signal = voxelize_signal(tap_root, grid.dims, grid.voxel_size, grid.supersample, grid.origin, 1)
    expected, _, _ = normalize_unit(signal.voxels.astype(np.float64))
    np.testing.assert_allclose(pair.input.voxels, expected, atol=1e-6)
    assert pair.meta.measured_snr is None
    assert pair.meta.noise_scale == 0.0


def test_split_seeds_never_overlap(tiny_pipeline):
    jobs = split_seeds(tiny_pipeline)
    train = {seed for split, seed, _ in jobs if split == Split.TRAIN}
    val = {seed for split, seed, _ in jobs if split == Split.VALIDATION}
    assert len(train) == 2 and len(val) == 2
    assert not train & val


def test_default_sizes():
    from rootseg.config.pipeline import PipelineConfig

    jobs = split_seeds(PipelineConfig())
    assert sum(1 for s, _, _ in jobs if s == Split.TRAIN) == 384
    assert sum(1 for s, _, _ in jobs if s == Split.VALIDATION) == 384


def test_generate_dataset_layout(tmp_path, tap_root, tiny_pipeline):
    manifest = generate_dataset([tap_root], tiny_pipeline, tmp_path, workers=1)
    assert len(manifest.entries) == 4
    assert len(list(tmp_path.glob("pairs/*/*.vol3"))) == 4
    assert len(list(tmp_path.glob("pairs/*/*.msk3"))) == 4
    assert (tmp_path / MANIFEST_NAME).exists()
    assert (tmp_path / "effective_config.json").exists()

    loaded = load_manifest(tmp_path)
    assert loaded.entries == manifest.entries
    pair = load_pair(tmp_path, loaded.split(Split.VALIDATION)[0])
    assert pair.ground_truth.dims == pair.input.dims.scaled(2)


def test_rerun_gives_identical_manifest(tmp_path, tap_root, tiny_pipeline):
    generate_dataset([tap_root], tiny_pipeline, tmp_path / "a", workers=1)
    generate_dataset([tap_root], tiny_pipeline, tmp_path / "b", workers=2)
    assert manifest_hash(tmp_path / "a") == manifest_hash(tmp_path / "b")


def test_models_are_used_round_robin(tmp_path, tap_root, tiny_pipeline):
    other = tap_root.model_copy(update={"name": "other"})
    manifest = generate_dataset([tap_root, other], tiny_pipeline, tmp_path, workers=1)
    names = [e.meta.model_name for e in manifest.split(Split.TRAIN)]
    assert names == ["tap", "other"]


def test_no_models(tmp_path, tiny_pipeline):
    with pytest.raises(DatasetError):
        generate_dataset([], tiny_pipeline, tmp_path)


def test_malformed_manifest(tmp_path):
    (tmp_path / MANIFEST_NAME).write_text('{"config": {}}\n')
    with pytest.raises(DatasetError):
        load_manifest(tmp_path)


def test_models_index(tmp_path):
    model = tmp_path / "m.rootm"
    model.write_text("N 0 0 0 1\n")
    path = write_models_index([model], tmp_path)
    payload = json.loads(path.read_text())
    assert "m.rootm" in json.dumps(payload)
