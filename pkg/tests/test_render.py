import matplotlib.pyplot as plt
import numpy as np
import pytest

from conftest import make_mask
from rootseg.metrics.tolerant import dt_curve
from rootseg.volume.core import IndexOutOfRangeError, Volume3D
from rootseg.volume.render import (
    FN_COLOR,
    FP_COLOR,
    TP_COLOR,
    extract_slice,
    normalize_slice,
    overlay_image,
    render_curve,
    render_overlay,
    render_slice,
)


def test_extract_slice_orientation():
    array = np.arange(2 * 3 * 4).reshape(2, 3, 4)
    assert extract_slice(array, "z", 1).shape == (3, 4)
    assert extract_slice(array, "y", 0).shape == (2, 4)
    assert extract_slice(array, "x", 3).shape == (2, 3)


def test_extract_slice_out_of_range():
    with pytest.raises(IndexOutOfRangeError):
        extract_slice(np.zeros((2, 3, 4)), "x", 4)


def test_constant_slice_normalizes_to_zero():
    assert np.all(normalize_slice(np.full((3, 3), 7.0)) == 0.0)


def test_full_dynamic_range():
    image = normalize_slice(np.array([[0.0, 0.5], [1.0, 0.25]]))
    assert image.min() == 0.0
    assert image.max() == 1.0


def test_render_slice_writes_png(tmp_path):
    v = Volume3D(np.random.default_rng(0).random((4, 5, 6)))
    path = render_slice(v, "z", 2, tmp_path / "slice.png")
    image = plt.imread(path)
    assert image.shape[:2] == (5, 6)


def test_single_pixel_slice(tmp_path):
    path = render_slice(Volume3D(np.full((1, 1, 1), 3.0)), "z", 0, tmp_path / "one.png")
    assert plt.imread(path).shape[:2] == (1, 1)


def test_render_is_byte_stable(tmp_path):
    v = Volume3D(np.random.default_rng(1).random((2, 4, 4)))
    a = render_slice(v, "x", 1, tmp_path / "a.png").read_bytes()
    b = render_slice(v, "x", 1, tmp_path / "b.png").read_bytes()
    assert a == b


def test_overlay_colours():
    shape = (1, 1, 5)
    ground_truth = make_mask(shape, [(0, 0, 0), (0, 0, 1)])
    prediction = make_mask(shape, [(0, 0, 1), (0, 0, 4)])
    rgb = overlay_image(ground_truth, prediction, "z", 0)
    assert tuple(rgb[0, 0]) == FN_COLOR
    assert tuple(rgb[0, 1]) == TP_COLOR
    assert tuple(rgb[0, 4]) == FP_COLOR
    assert tuple(rgb[0, 2]) == (0, 0, 0)


def test_overlay_tolerance_turns_near_misses_green():
    shape = (1, 1, 5)
    ground_truth = make_mask(shape, [(0, 0, 0)])
    prediction = make_mask(shape, [(0, 0, 1)])
    rgb = overlay_image(ground_truth, prediction, "z", 0, tolerance=1)
    assert tuple(rgb[0, 0]) == TP_COLOR
    assert tuple(rgb[0, 1]) == TP_COLOR


def test_render_overlay_and_curve(tmp_path):
    shape = (2, 4, 4)
    ground_truth = make_mask(shape, [(0, 1, 1), (1, 2, 2)])
    prediction = make_mask(shape, [(0, 1, 2)])
    assert render_overlay(ground_truth, prediction, "z", 0, tmp_path / "o.png").exists()
    curve = dt_curve(ground_truth, prediction, 2)
    assert render_curve(curve, tmp_path / "c.png").stat().st_size > 0
