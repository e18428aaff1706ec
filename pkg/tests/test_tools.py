import numpy as np
import pytest

from conftest import make_mask
from rootseg.net.refinenet import build_network
from rootseg.synth.dataset import generate_dataset
from rootseg.tools import register_tools
from rootseg.training.checkpoint import checkpoint_save
from rootseg.volume.core import Volume3D
from rootseg.volume.io import load_volume, save_mask, save_volume


class ToolRecorder:
    """Collects the functions registered through ``@mcp.tool()``."""

    def __init__(self):
        self.tools = {}

    def tool(self):
        def decorator(fn):
            self.tools[fn.__name__] = fn
            return fn
        return decorator


@pytest.fixture
def tools():
    recorder = ToolRecorder()
    register_tools(recorder)
    return recorder.tools


def test_registered_names(tools):
    assert set(tools) == {
        "evaluate_segmentation",
        "render_volume_slice",
        "segment_volume_file",
        "describe_dataset",
    }


class TestEvaluate:
    async def test_report_and_curve(self, tools, tmp_path):
        g = save_mask(make_mask((1, 1, 6), [(0, 0, 2)]), tmp_path / "gt.msk3")
        s = save_mask(make_mask((1, 1, 6), [(0, 0, 3)]), tmp_path / "pred.msk3")
        result = await tools["evaluate_segmentation"](str(s), str(g), tolerance=1, curve_max=1)
        assert result["success"]
        assert result["report"]["f1"] == 1.0
        assert [row["f1"] for row in result["curve"]] == [0.0, 1.0]

    async def test_confidence_input_is_thresholded(self, tools, tmp_path):
        g = save_mask(make_mask((1, 1, 4), [(0, 0, 1)]), tmp_path / "gt.msk3")
        conf = np.array([[[0.1, 0.7, 0.2, 0.4]]], dtype=np.float32)
        s = save_volume(Volume3D(conf), tmp_path / "conf.vol3")
        result = await tools["evaluate_segmentation"](str(s), str(g), threshold=0.5)
        assert result["report"]["f1"] == 1.0

    async def test_missing_file_is_validation_error(self, tools, tmp_path):
        result = await tools["evaluate_segmentation"](str(tmp_path / "a"), str(tmp_path / "b"))
        assert result == {
            "success": False,
            "error": "validation_error",
            "message": result["message"],
        }

    async def test_bad_element(self, tools, tmp_path):
        g = save_mask(make_mask((1, 1, 4)), tmp_path / "gt.msk3")
        result = await tools["evaluate_segmentation"](str(g), str(g), element="star")
        assert result["error"] == "validation_error"


class TestRender:
    async def test_slice(self, tools, tmp_path):
        volume = Volume3D(np.random.default_rng(0).random((2, 3, 4)))
        path = save_volume(volume, tmp_path / "v.vol3")
        result = await tools["render_volume_slice"](str(path), "x", 2, str(tmp_path / "s.png"))
        assert result["success"]
        assert (tmp_path / "s.png").exists()

    async def test_overlay(self, tools, tmp_path):
        g = save_mask(make_mask((1, 2, 2), [(0, 0, 0)]), tmp_path / "gt.msk3")
        result = await tools["render_volume_slice"](
            str(g), "z", 0, str(tmp_path / "o.png"), ground_truth_path=str(g)
        )
        assert result["success"]

    async def test_bad_axis(self, tools, tmp_path):
        path = save_volume(Volume3D(np.zeros((2, 3, 4))), tmp_path / "v.vol3")
        result = await tools["render_volume_slice"](str(path), "w", 0, str(tmp_path / "s.png"))
        assert result["error"] == "validation_error"


async def test_segment_volume_file(tools, tmp_path, tiny_net_config):
    checkpoint = checkpoint_save(build_network(tiny_net_config), tmp_path / "net.rsck")
    data = np.random.default_rng(1).random((2, 32, 32))
    volume = save_volume(Volume3D(data), tmp_path / "in.vol3")
    result = await tools["segment_volume_file"](str(checkpoint), str(volume), str(tmp_path / "out"))
    assert result["success"]
    assert result["dims"] == {"x": 64, "y": 64, "z": 4}
    assert load_volume(result["confidence_path"]).dims.z == 4


async def test_describe_dataset(tools, tmp_path, tap_root, tiny_pipeline):
    manifest = generate_dataset([tap_root], tiny_pipeline, tmp_path, workers=1)
    result = await tools["describe_dataset"](str(tmp_path))
    assert result["success"]
    assert result["config_hash"] == manifest.config_hash
    assert result["splits"]["train"]["count"] == 2
    assert sum(result["splits"]["validation"]["snr_bins"].values()) == 2


async def test_describe_missing_dataset(tools, tmp_path):
    result = await tools["describe_dataset"](str(tmp_path))
    assert result["error"] == "validation_error"
