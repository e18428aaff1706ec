import json

import numpy as np
import pandas as pd
import pytest

from conftest import TAP_ROOT, make_mask
from rootseg.cli.commands import LOCK_NAME
from rootseg.cli.main import EXIT_INVALID, EXIT_OK, run
from rootseg.synth.dataset import MANIFEST_NAME
from rootseg.volume.core import Volume3D
from rootseg.volume.io import load_mask, load_volume, save_mask, save_volume

TINY_TOML = """
[grid]
voxel_size = 0.5
supersample = 2

[grid.dims]
x = 32
y = 32
z = 4

[dataset]
n_train = 2
n_val = 2
seed = 3
models = ["tap.rootm"]

[net]
encoder_widths = [2, 2, 4, 4, 4]
refine_width = 4

[train]
epochs = 1
batch_size = 4
lr = 1e-3
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Config, generated dataset and trained checkpoint shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    (root / "tap.rootm").write_text(TAP_ROOT)
    config = root / "tiny.toml"
    config.write_text(TINY_TOML)

    data = root / "data"
    assert run(["generate", "--config", str(config), "--out", str(data), "--workers", "1"]) == 0
    run_dir = root / "run"
    args = ["train", "--config", str(config), "--dataset", str(data), "--out", str(run_dir)]
    assert run(args) == 0
    return root, config, data, run_dir


class TestGenerate:
    def test_layout_and_hash(self, workspace):
        _, _, data, _ = workspace
        assert (data / MANIFEST_NAME).exists()
        assert (data / "models.json").exists()
        assert len(list(data.glob("pairs/*/*.vol3"))) == 4
        assert not (data / LOCK_NAME).exists()

    def test_rerun_prints_same_digest(self, workspace, tmp_path, capsys):
        root, config, _, _ = workspace
        digests = []
        for name in ("a", "b"):
            args = ["generate", "--config", str(config), "--out", str(tmp_path / name)]
            assert run(args + ["--workers", "1"]) == 0
            digests.append(capsys.readouterr().out.split()[-1])
        assert digests[0] == digests[1]

    def test_flags_override_config(self, workspace, tmp_path):
        _, config, _, _ = workspace
        out = tmp_path / "small"
        args = ["generate", "--config", str(config), "--out", str(out), "--n-train", "1"]
        assert run(args + ["--n-val", "1", "--workers", "1"]) == 0
        lines = (out / MANIFEST_NAME).read_text().splitlines()
        assert len(lines) == 3

    def test_missing_model(self, workspace, tmp_path):
        _, config, _, _ = workspace
        args = ["generate", "--config", str(config), "--out", str(tmp_path / "x")]
        assert run(args + ["--models", "absent.rootm"]) == EXIT_INVALID

    def test_locked_output(self, workspace, tmp_path):
        _, config, _, _ = workspace
        out = tmp_path / "busy"
        out.mkdir()
        (out / LOCK_NAME).write_text("123")
        assert run(["generate", "--config", str(config), "--out", str(out)]) == EXIT_INVALID
        assert (out / LOCK_NAME).exists()


class TestTrain:
    def test_outputs(self, workspace):
        _, _, _, run_dir = workspace
        assert (run_dir / "checkpoint.rsck").exists()
        history = pd.read_csv(run_dir / "history.csv")
        assert list(history["epoch"]) == [1]
        effective = json.loads((run_dir / "effective_config.json").read_text())
        assert effective["train"]["epochs"] == 1

    def test_missing_dataset(self, tmp_path):
        assert run(["train", "--dataset", str(tmp_path / "nowhere")]) == EXIT_INVALID


class TestPredict:
    def test_writes_confidence_and_mask(self, workspace, tmp_path):
        _, config, data, run_dir = workspace
        volume = next(data.glob("pairs/validation/*.vol3"))
        args = ["predict", "--checkpoint", str(run_dir / "checkpoint.rsck"), "--input", str(volume)]
        assert run(args + ["--config", str(config), "--out", str(tmp_path)]) == EXIT_OK

        confidence = load_volume(tmp_path / f"{volume.stem}.conf.vol3")
        mask = load_mask(tmp_path / f"{volume.stem}.mask.msk3")
        assert confidence.dims == load_volume(volume).dims.scaled(2)
        assert mask.dims == confidence.dims

    def test_indivisible_input(self, workspace, tmp_path):
        _, _, _, run_dir = workspace
        bad = save_volume(Volume3D(np.zeros((2, 30, 32))), tmp_path / "bad.vol3")
        args = ["predict", "--checkpoint", str(run_dir / "checkpoint.rsck"), "--input", str(bad)]
        assert run(args + ["--out", str(tmp_path / "out")]) == EXIT_INVALID

    def test_config_mismatch(self, workspace, tmp_path):
        _, config, data, run_dir = workspace
        volume = next(data.glob("pairs/validation/*.vol3"))
        args = [
            "predict", "--checkpoint", str(run_dir / "checkpoint.rsck"), "--input", str(volume),
            "--config", str(config), "--set", "net.refine_width=8", "--out", str(tmp_path),
        ]
        assert run(args) == EXIT_INVALID


class TestEvaluate:
    @pytest.fixture
    def masks(self, tmp_path):
        g = save_mask(make_mask((1, 1, 8), [(0, 0, 2), (0, 0, 3)]), tmp_path / "gt.msk3")
        s = save_mask(make_mask((1, 1, 8), [(0, 0, 3), (0, 0, 4)]), tmp_path / "pred.msk3")
        return g, s

    def test_tolerant_report_and_curve(self, masks, tmp_path):
        g, s = masks
        out = tmp_path / "eval"
        args = ["evaluate", "--ground-truth", str(g), "--prediction", str(s), "--out", str(out)]
        assert run(args + ["--tolerance", "1", "--curve", "2"]) == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["f1"] == 1.0
        assert report["tolerance"] == 1
        assert list(pd.read_csv(out / "curve.csv")["tolerance"]) == [0, 1, 2]
        assert (out / "curve.png").exists()

    def test_standard_metrics_by_default(self, masks, tmp_path):
        g, s = masks
        out = tmp_path / "eval"
        assert run(["evaluate", "--ground-truth", str(g), "--prediction", str(s),
                    "--out", str(out)]) == EXIT_OK
        assert json.loads((out / "report.json").read_text())["f1"] == pytest.approx(0.5)

    def test_dimension_mismatch(self, masks, tmp_path):
        g, _ = masks
        other = save_mask(make_mask((1, 1, 9)), tmp_path / "other.msk3")
        args = ["evaluate", "--ground-truth", str(g), "--prediction", str(other)]
        assert run(args + ["--out", str(tmp_path / "eval")]) == EXIT_INVALID

    def test_negative_tolerance(self, masks, tmp_path):
        g, s = masks
        args = ["evaluate", "--ground-truth", str(g), "--prediction", str(s), "--tolerance", "-1"]
        assert run(args + ["--out", str(tmp_path / "eval")]) == EXIT_INVALID

    def test_needs_inputs(self, tmp_path):
        assert run(["evaluate", "--out", str(tmp_path)]) == EXIT_INVALID

    def test_dataset_validation(self, workspace, tmp_path):
        _, _, data, run_dir = workspace
        checkpoint = str(run_dir / "checkpoint.rsck")
        args = ["evaluate", "--dataset", str(data), "--checkpoint", checkpoint]
        assert run(args + ["--out", str(tmp_path)]) == EXIT_OK
        frame = pd.read_csv(tmp_path / "snr_report.csv")
        assert frame["bin"].iloc[-1] == "overall"
        assert frame["n_samples"].iloc[-1] == 2


class TestRender:
    def test_slice(self, tmp_path):
        volume = Volume3D(np.random.default_rng(0).random((2, 4, 6)))
        path = save_volume(volume, tmp_path / "v.vol3")
        out = tmp_path / "slice.png"
        assert run(["render", str(path), "--axis", "y", "--index", "1", "--out", str(out)]) == 0
        assert out.exists()

    def test_overlay(self, tmp_path):
        g = save_mask(make_mask((1, 4, 4), [(0, 1, 1)]), tmp_path / "gt.msk3")
        s = save_mask(make_mask((1, 4, 4), [(0, 1, 2)]), tmp_path / "pred.msk3")
        out = tmp_path / "overlay.png"
        args = ["render", str(s), "--index", "0", "--ground-truth", str(g), "--out", str(out)]
        assert run(args + ["--tolerance", "1"]) == 0
        assert out.exists()

    def test_index_out_of_range(self, tmp_path):
        path = save_volume(Volume3D(np.zeros((2, 4, 6))), tmp_path / "v.vol3")
        args = ["render", str(path), "--axis", "z", "--index", "2"]
        assert run(args + ["--out", str(tmp_path / "s.png")]) == EXIT_INVALID


def test_unknown_subcommand():
    assert run(["explode"]) == EXIT_INVALID


def test_version():
    assert run(["--version"]) == EXIT_OK


def test_bad_override(tmp_path):
    args = ["generate", "--set", "grid.nope=1", "--out", str(tmp_path)]
    assert run(args) == EXIT_INVALID


@pytest.mark.slow
def test_gradcheck_passes(capsys):
    assert run(["gradcheck", "--seed", "0"]) == EXIT_OK
    assert "max_relative_error" in capsys.readouterr().out
