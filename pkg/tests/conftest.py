import hypothesis
import numpy as np
import pytest

from rootseg.config.pipeline import NetConfig, NoiseConfig, NoiseTemplate, PipelineConfig
from rootseg.models.domain import Dims, NoiseKind
from rootseg.roots.model import parse_root_model
from rootseg.volume.core import BinaryMask3D

hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=200, deadline=None)
hypothesis.settings.load_profile("fast")

# Vertical tap root through the centre of a 16 x 16 x 2 mm grid.
TAP_ROOT = """
# tap root
N 8.0 8.0 0.1 0.9
N 8.0 8.0 1.0 0.8
N 8.0 8.0 1.9 0.7
S 0 1
S 1 2
"""


def make_mask(shape, points=()):
    """Mask of the given (z, y, x) shape with the listed voxels set."""
    bits = np.zeros(shape, dtype=bool)
    for p in points:
        bits[p] = True
    return BinaryMask3D(bits)


@pytest.fixture
def tap_root():
    return parse_root_model(TAP_ROOT, name="tap")


@pytest.fixture
def tiny_net_config():
    return NetConfig(encoder_widths=(2, 2, 4, 4, 4), refine_width=4, seed=0)


@pytest.fixture
def tiny_pipeline(tiny_net_config):
    """Desk-scale pipeline: 32 x 32 x 4 inputs, two pairs per split."""
    return PipelineConfig.model_validate({
        "grid": {"dims": {"x": 32, "y": 32, "z": 4}, "voxel_size": 0.5, "supersample": 2},
        "dataset": {"n_train": 2, "n_val": 2, "seed": 3},
        "net": tiny_net_config.model_dump(),
        "train": {"epochs": 1, "batch_size": 4, "lr": 1e-3},
    })


@pytest.fixture
def noiseless_pipeline(tiny_pipeline):
    """Pipeline whose noise is identically zero and whose transform is the identity."""
    return tiny_pipeline.model_copy(update={
        "noise": NoiseConfig(
            templates=[NoiseTemplate(kind=NoiseKind.UNIFORM, amplitude_range=(0.0, 0.0))],
            min_specs=1,
            max_specs=1,
        ),
        "transforms": tiny_pipeline.transforms.model_copy(update={
            "rotate": False,
            "mirror_probability": 0.0,
            "thickness_range": (1.0, 1.0),
        }),
    })


@pytest.fixture
def small_dims():
    return Dims(x=8, y=6, z=4)
