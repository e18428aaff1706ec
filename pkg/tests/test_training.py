import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rootseg.config.pipeline import load_config
from rootseg.models.domain import Split
from rootseg.net.blocks import ShapeError
from rootseg.net.refinenet import build_network
from rootseg.roots.model import load_root_model
from rootseg.synth.dataset import generate_dataset, load_pair
from rootseg.training.checkpoint import (
    ConfigHashMismatchError,
    CorruptCheckpointError,
    checkpoint_bytes,
    checkpoint_load,
    checkpoint_save,
)
from rootseg.training.gradcheck import grad_check, run_grad_check, tiny_config
from rootseg.training.loss import bce_loss, clip_gradients, global_norm
from rootseg.training.trainer import train, write_history_csv
from rootseg.training.validate import EmptyDatasetError, validate
from rootseg.volume.core import Volume3D

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def dataset(tmp_path, tap_root, tiny_pipeline):
    manifest = generate_dataset([tap_root], tiny_pipeline, tmp_path / "data", workers=1)
    return manifest, tmp_path / "data"


class TestLoss:
    def test_half_confidence_is_ln2(self):
        pred = torch.full((1, 2, 4, 4), 0.5)
        target = (torch.arange(32).reshape(1, 2, 4, 4) % 2).float()
        assert float(bce_loss(pred, target)) == pytest.approx(math.log(2), rel=1e-6)

    def test_logits_match_probabilities(self):
        logits = torch.randn(1, 2, 8, 8, generator=torch.Generator().manual_seed(0))
        target = (torch.rand(1, 2, 8, 8, generator=torch.Generator().manual_seed(1)) < 0.5)
        a = bce_loss(logits, target.float(), from_logits=True)
        b = bce_loss(torch.sigmoid(logits), target.float())
        assert float(a) == pytest.approx(float(b), rel=1e-4)

    def test_perfect_prediction_is_near_zero(self):
        target = torch.tensor([[0.0, 1.0], [1.0, 0.0]])
        assert float(bce_loss(target, target)) < 1e-5

    def test_pos_weight_scales_positive_term(self):
        pred = torch.full((4,), 0.25)
        ones = torch.ones(4)
        assert float(bce_loss(pred, ones, pos_weight=3.0)) == pytest.approx(
            3.0 * float(bce_loss(pred, ones))
        )

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            bce_loss(torch.zeros(2, 2), torch.zeros(2, 3))


class TestClipping:
    def test_large_gradients_are_scaled_to_threshold(self):
        grads = [torch.full((3, 4), 1.0), torch.full((2,), -2.0)]
        clipped = clip_gradients(grads, 0.01)
        assert global_norm(clipped) == pytest.approx(0.01)
        for before, after in zip(grads, clipped):
            ratio = after / before
            assert torch.allclose(ratio, ratio.flatten()[0].expand_as(ratio))

    def test_small_gradients_unchanged(self):
        grads = [torch.full((3,), 1e-4)]
        assert clip_gradients(grads, 0.01)[0] is grads[0]

    def test_zero_gradients_unchanged(self):
        grads = [torch.zeros(5), None]
        clipped = clip_gradients(grads, 0.01)
        assert clipped[0] is grads[0] and clipped[1] is None

    @given(
        a=arrays(np.float32, (3, 4), elements=st.floats(-100, 100, width=32)),
        b=arrays(np.float32, (5,), elements=st.floats(-100, 100, width=32)),
        c=st.floats(1e-3, 50.0),
    )
    def test_norm_never_increases(self, a, b, c):
        grads = [torch.from_numpy(a), torch.from_numpy(b)]
        before = global_norm(grads)
        after = global_norm(clip_gradients(grads, c))
        assert after <= before * (1 + 1e-5) + 1e-12
        assert after <= c * (1 + 1e-5)

    @pytest.mark.parametrize("c", [0.0, -1.0])
    def test_threshold_must_be_positive(self, c):
        with pytest.raises(ValueError):
            clip_gradients([torch.ones(2)], c)


class TestCheckpoint:
    def test_roundtrip(self, tmp_path, tiny_net_config):
        net = build_network(tiny_net_config)
        path = checkpoint_save(net, tmp_path / "net.rsck")
        loaded = checkpoint_load(path, tiny_net_config)
        for (name, a), (_, b) in zip(net.state_dict().items(), loaded.state_dict().items()):
            assert torch.equal(a, b), name
        assert checkpoint_bytes(loaded) == path.read_bytes()

    def test_config_mismatch(self, tmp_path, tiny_net_config):
        path = checkpoint_save(build_network(tiny_net_config), tmp_path / "net.rsck")
        other = tiny_net_config.model_copy(update={"refine_width": 8})
        with pytest.raises(ConfigHashMismatchError):
            checkpoint_load(path, other)

    def test_flipped_payload_byte(self, tmp_path, tiny_net_config):
        path = checkpoint_save(build_network(tiny_net_config), tmp_path / "net.rsck")
        data = bytearray(path.read_bytes())
        data[-1] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(CorruptCheckpointError, match="checksum"):
            checkpoint_load(path)

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "junk.rsck"
        path.write_bytes(b"hello")
        with pytest.raises(CorruptCheckpointError):
            checkpoint_load(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            checkpoint_load(tmp_path / "absent.rsck")

    def test_double_precision_survives(self, tmp_path, tiny_net_config):
        net = build_network(tiny_net_config, dtype=torch.float64)
        loaded = checkpoint_load(checkpoint_save(net, tmp_path / "net.rsck"))
        assert next(loaded.parameters()).dtype == torch.float64


class TestValidate:
    def test_oracle_scores_one(self, dataset):
        manifest, root = dataset
        truth = {}
        for entry in manifest.split(Split.VALIDATION):
            pair = load_pair(root, entry)
            truth[pair.input.voxels.tobytes()] = pair.ground_truth.bits.astype(np.float32)

        report = validate(lambda v: Volume3D(truth[v.voxels.tobytes()]), manifest, root)
        assert report.overall.f1 == pytest.approx(1.0)
        assert report.n_samples == 2
        assert sum(b.n_samples for b in report.bins) == 2

    def test_empty_prediction_scores_zero(self, dataset):
        manifest, root = dataset
        report = validate(lambda v: Volume3D(np.zeros(v.dims.scaled(2).shape)), manifest, root)
        assert report.overall.recall == 0.0
        assert report.overall.f1 == 0.0

    def test_network_predictor(self, dataset, tiny_net_config):
        manifest, root = dataset
        report = validate(build_network(tiny_net_config), manifest, root, split=Split.TRAIN)
        assert 0.0 <= report.overall.f1 <= 1.0

    def test_empty_split(self, dataset):
        manifest, root = dataset
        empty = manifest.model_copy(update={"entries": manifest.split(Split.TRAIN)})
        with pytest.raises(EmptyDatasetError):
            validate(lambda v: v, empty, root)


class TestTrain:
    def test_one_epoch(self, dataset, tiny_pipeline, tmp_path):
        manifest, root = dataset
        net, history = train(manifest, root, tiny_pipeline.net, tiny_pipeline.train)
        assert len(history) == 1
        record = history.records[0]
        assert math.isfinite(record.train_loss)
        assert record.val_f1 is not None
        assert not net.training

        frame = pd.read_csv(write_history_csv(history, tmp_path / "history.csv"))
        assert list(frame["epoch"]) == [1]
        assert {"train_loss", "val_loss", "val_f1"} <= set(frame.columns)

    def test_zero_learning_rate_keeps_weights(self, dataset, tiny_pipeline):
        manifest, root = dataset
        config = tiny_pipeline.train.model_copy(update={"lr": 0.0, "validate_every": 0})
        net, _ = train(manifest, root, tiny_pipeline.net, config)
        initial = build_network(tiny_pipeline.net)
        for a, b in zip(net.parameters(), initial.parameters()):
            assert torch.equal(a, b)

    def test_epoch_callback(self, dataset, tiny_pipeline):
        manifest, root = dataset
        seen = []
        config = tiny_pipeline.train.model_copy(update={"epochs": 2, "validate_every": 2})
        train(manifest, root, tiny_pipeline.net, config, on_epoch=lambda n, r: seen.append(r))
        assert [r.epoch for r in seen] == [1, 2]
        assert seen[0].val_loss is None
        assert seen[1].val_loss is not None

    def test_empty_train_split(self, dataset, tiny_pipeline):
        manifest, root = dataset
        empty = manifest.model_copy(update={"entries": manifest.split(Split.VALIDATION)})
        with pytest.raises(EmptyDatasetError):
            train(empty, root, tiny_pipeline.net, tiny_pipeline.train)

    @pytest.mark.slow
    def test_loss_decreases_with_adam(self, dataset, tiny_pipeline):
        manifest, root = dataset
        config = tiny_pipeline.train.model_copy(
            update={"optimizer": "adam", "lr": 1e-2, "clip": 10.0, "epochs": 8,
                    "validate_every": 0}
        )
        _, history = train(manifest, root, tiny_pipeline.net, config)
        assert history.records[-1].train_loss < history.records[0].train_loss

    def test_rerun_gives_identical_checkpoint(self, dataset, tiny_pipeline):
        manifest, root = dataset
        config = tiny_pipeline.train.model_copy(update={"epochs": 2, "validate_every": 0})
        first, _ = train(manifest, root, tiny_pipeline.net, config)
        second, _ = train(manifest, root, tiny_pipeline.net, config)
        assert checkpoint_bytes(first) == checkpoint_bytes(second)

    @pytest.mark.slow
    def test_toy_config_learns(self, tmp_path):
        config = load_config(CONFIGS / "toy.toml")
        model = load_root_model(CONFIGS / "example.rootm")
        manifest = generate_dataset([model], config, tmp_path / "data", workers=1)
        root = tmp_path / "data"
        assert len(manifest.split(Split.TRAIN)) == 16
        assert len(manifest.split(Split.VALIDATION)) == 4

        baseline = validate(build_network(config.net), manifest, root, config.train.threshold)
        net, history = train(manifest, root, config.net, config.train)
        trained = validate(net, manifest, root, config.train.threshold)

        losses = [r.train_loss for r in history.records]
        assert len(losses) == 30
        assert losses[-1] < 0.5 * losses[0]
        assert trained.overall.f1 >= baseline.overall.f1 + 0.3

        untrained = build_network(config.net)
        seen_before = validate(untrained, manifest, root, config.train.threshold, split=Split.TRAIN)
        seen_after = validate(net, manifest, root, config.train.threshold, split=Split.TRAIN)
        assert seen_after.overall.f1 > seen_before.overall.f1


class TestGradCheck:
    def test_backward_matches_finite_differences(self):
        result = run_grad_check(tiny_config(), seed=0, n_samples=30)
        assert result.all_finite
        assert result.n_checked == 30
        assert result.max_relative_error < 1e-4

    @pytest.mark.slow
    def test_repeatable(self):
        first = grad_check(tiny_config(), seed=0)
        assert first < 1e-4
        assert grad_check(tiny_config(), seed=0) == first

    def test_degenerate_input_has_finite_gradients(self):
        result = run_grad_check(seed=1, n_samples=10, degenerate=True)
        assert result.all_finite
        assert math.isfinite(result.max_relative_error)
