import numpy as np
import pytest
import torch

from rootseg.net.blocks import RefineBlock, ShapeError, refine_block
from rootseg.net.inference import segment_volume
from rootseg.net.pca import (
    BLUE,
    GREEN,
    RED,
    fit_pca,
    fit_volume_pca,
    pca_compress,
    window_samples,
)
from rootseg.net.refinenet import (
    build_network,
    check_divisible,
    encoder_forward,
    forward,
    nearest_valid,
)
from rootseg.services.validators import ValidationError
from rootseg.volume.core import LayerWindow, Volume3D, layer_window


def _window(layers):
    layers = np.asarray(layers, dtype=np.float32)
    return LayerWindow(layers=layers, center=2, sources=(0, 1, 2, 3, 4))


class TestPca:
    def test_identical_layers_are_rank_one(self):
        base = np.random.default_rng(0).random((16, 16))
        enc = pca_compress(_window(np.stack([base] * 5)))
        assert enc.basis.explained_variance_ratio[0] == pytest.approx(1.0)
        red, green, blue = enc.channels
        assert np.all(red == 0.0)
        assert np.all(blue == 0.0)
        assert green.max() == pytest.approx(1.0)

    def test_white_noise_explained_variance(self):
        layers = np.random.default_rng(42).standard_normal((5, 64, 64))
        ratio = pca_compress(_window(layers)).basis.explained_variance_ratio
        assert ratio.sum() == pytest.approx(3 / 5, abs=0.05)

    def test_variance_ordering(self):
        layers = np.random.default_rng(1).random((5, 32, 32))
        basis = pca_compress(_window(layers)).basis
        assert np.all(np.diff(basis.eigenvalues) <= 0)

    def test_channel_ordering_on_every_window(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            v = Volume3D(rng.random((6, 16, 16)))
            for z in range(v.dims.z):
                ev = pca_compress(layer_window(v, z)).basis.eigenvalues
                assert ev[GREEN] >= ev[RED] >= ev[BLUE]

    @pytest.mark.parametrize("rank", [1, 2, 3])
    def test_low_rank_reconstruction(self, rank):
        rng = np.random.default_rng(2)
        factors = rng.standard_normal((rank, 24 * 24))
        mixing = rng.standard_normal((5, rank))
        layers = (mixing @ factors).reshape(5, 24, 24)
        enc = pca_compress(_window(layers))
        np.testing.assert_allclose(enc.reconstruct(), layers, atol=1e-4)

    def test_sign_convention(self):
        layers = np.random.default_rng(3).random((5, 16, 16))
        basis = fit_pca(window_samples(_window(layers)))
        for component in basis.components:
            assert component[np.argmax(np.abs(component))] > 0

    def test_channels_in_unit_range(self):
        enc = pca_compress(_window(np.random.default_rng(4).random((5, 8, 8))))
        assert enc.channels.min() >= 0.0 and enc.channels.max() <= 1.0


class TestShapes:
    @pytest.mark.parametrize("n,ok", [(32, True), (64, True), (96, True), (48, False), (1, False)])
    def test_divisibility(self, n, ok):
        if ok:
            check_divisible(n, 32)
        else:
            with pytest.raises(ShapeError, match="nearest valid size"):
                check_divisible(n, 32)

    def test_nearest_valid(self):
        assert nearest_valid(40) == 32
        assert nearest_valid(50) == 64
        assert nearest_valid(3) == 32

    def test_encoder_halving_chain(self, tiny_net_config):
        net = build_network(tiny_net_config)
        enc = pca_compress(_window(np.random.default_rng(0).random((5, 64, 64))))
        sizes = [f.shape[-1] for f in encoder_forward(enc, net)]
        assert sizes == [32, 16, 8, 4, 2]

    def test_rectangular_input(self, tiny_net_config):
        net = build_network(tiny_net_config)
        enc = pca_compress(_window(np.random.default_rng(0).random((5, 96, 64))))
        assert tuple(encoder_forward(enc, net)[-1].shape[-2:]) == (3, 2)

    def test_zero_input_zero_bias_gives_zero_features(self, tiny_net_config):
        net = build_network(tiny_net_config)
        with torch.no_grad():
            for name, p in net.named_parameters():
                if name.endswith("bias"):
                    p.zero_()
        features = net.encoder(torch.zeros(1, 3, 64, 64))
        assert all(float(f.abs().max()) == 0.0 for f in features)


class TestRefineBlock:
    def test_first_block_keeps_lateral_resolution(self):
        block = RefineBlock(4, 6, has_coarser=False)
        out = refine_block(block, None, torch.randn(1, 4, 2, 2))
        assert tuple(out.shape) == (1, 6, 2, 2)

    def test_coarser_path_is_upsampled(self):
        block = RefineBlock(4, 6)
        out = refine_block(block, torch.randn(1, 6, 4, 4), torch.randn(1, 4, 8, 8))
        assert tuple(out.shape) == (1, 6, 8, 8)

    def test_zero_inputs_zero_biases(self):
        block = RefineBlock(4, 6)
        with torch.no_grad():
            for name, p in block.named_parameters():
                if name.endswith("bias"):
                    p.zero_()
            out = refine_block(block, torch.zeros(1, 6, 2, 2), torch.zeros(1, 4, 4, 4))
        assert float(out.abs().max()) == 0.0

    def test_resolution_mismatch(self):
        block = RefineBlock(4, 6)
        with pytest.raises(ShapeError):
            refine_block(block, torch.randn(1, 6, 3, 3), torch.randn(1, 4, 8, 8))

    def test_missing_coarser_input(self):
        with pytest.raises(ShapeError):
            refine_block(RefineBlock(4, 6), None, torch.randn(1, 4, 8, 8))


class TestForward:
    def test_window_to_two_maps(self, tiny_net_config):
        net = build_network(tiny_net_config)
        pair = forward(_window(np.random.default_rng(5).random((5, 64, 64))), net)
        assert pair.upper.shape == (128, 128)
        assert pair.lower.shape == (128, 128)
        assert np.all((pair.upper > 0) & (pair.upper < 1))

    def test_seeds_give_different_outputs(self, tiny_net_config):
        window = _window(np.random.default_rng(6).random((5, 32, 32)))
        a = forward(window, build_network(tiny_net_config))
        b = forward(window, build_network(tiny_net_config.model_copy(update={"seed": 1})))
        assert not np.array_equal(a.upper, b.upper)

    def test_same_seed_same_weights(self, tiny_net_config):
        a, b = build_network(tiny_net_config), build_network(tiny_net_config)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)

    def test_invalid_size(self, tiny_net_config):
        with pytest.raises(ShapeError):
            forward(_window(np.zeros((5, 40, 32))), build_network(tiny_net_config))


class TestSegmentVolume:
    @pytest.mark.parametrize("x", [32, 64, 96])
    @pytest.mark.parametrize("y", [32, 64])
    @pytest.mark.parametrize("z", [4, 8])
    def test_output_dims(self, tiny_net_config, x, y, z):
        v = Volume3D(np.random.default_rng(7).random((z, y, x)))
        conf = segment_volume(v, build_network(tiny_net_config))
        assert conf.dims == v.dims.scaled(2)
        assert np.all(np.isfinite(conf.voxels))
        assert conf.voxels.min() >= 0.0 and conf.voxels.max() <= 1.0

    def test_zero_head_gives_one_half(self, tiny_net_config):
        net = build_network(tiny_net_config)
        with torch.no_grad():
            net.head.weight.zero_()
            net.head.bias.zero_()
        conf = segment_volume(Volume3D(np.random.default_rng(8).random((2, 32, 32))), net)
        assert np.all(conf.voxels == 0.5)

    def test_layer_pairs_match_window_forward(self, tiny_net_config):
        net = build_network(tiny_net_config)
        v = Volume3D(np.random.default_rng(9).random((3, 32, 32)))
        conf = segment_volume(v, net, batch_size=1)
        pair = forward(layer_window(v, 1), net)
        np.testing.assert_allclose(conf.voxels[2], pair.upper, atol=1e-6)
        np.testing.assert_allclose(conf.voxels[3], pair.lower, atol=1e-6)

    def test_volume_basis_pairs_match_window_forward(self, tiny_net_config):
        net = build_network(tiny_net_config.model_copy(update={"pca_per_window": False}))
        v = Volume3D(np.random.default_rng(13).random((6, 32, 32)))
        conf = segment_volume(v, net, batch_size=1)
        pair = forward(layer_window(v, 2), net, fit_volume_pca(v))
        np.testing.assert_allclose(conf.voxels[4], pair.upper, atol=1e-6)
        np.testing.assert_allclose(conf.voxels[5], pair.lower, atol=1e-6)

    def test_volume_basis_is_required(self, tiny_net_config):
        net = build_network(tiny_net_config.model_copy(update={"pca_per_window": False}))
        v = Volume3D(np.random.default_rng(14).random((3, 32, 32)))
        with pytest.raises(ValidationError, match="fit_volume_pca"):
            forward(layer_window(v, 1), net)

    def test_locality(self, tiny_net_config):
        net = build_network(tiny_net_config)
        data = np.random.default_rng(10).random((16, 32, 32)).astype(np.float32)
        before = segment_volume(Volume3D(data), net, batch_size=1)
        data[9] += 1.0
        after = segment_volume(Volume3D(data), net, batch_size=1)
        assert np.array_equal(before.voxels[:14], after.voxels[:14])
        assert not np.array_equal(before.voxels[14:24], after.voxels[14:24])
        assert np.array_equal(before.voxels[24:], after.voxels[24:])

    def test_rejects_indivisible_size(self, tiny_net_config):
        with pytest.raises(ShapeError):
            segment_volume(Volume3D(np.zeros((2, 30, 32))), build_network(tiny_net_config))

    def test_deterministic(self, tiny_net_config):
        net = build_network(tiny_net_config)
        v = Volume3D(np.random.default_rng(11).random((2, 32, 32)))
        assert segment_volume(v, net) == segment_volume(v, net)
