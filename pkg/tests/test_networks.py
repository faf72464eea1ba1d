"""Tests for the U-Net and patch discriminator builders and the Network runner."""

import numpy as np
import pytest
from pydantic import ValidationError

from svct.errors import BackwardBeforeForwardError, CheckpointMismatchError, LayerShapeError
from svct.gradcheck import network_input_check, network_parameter_check
from svct.models import LayerSpec, NetworkSpec
from svct.nn_kit import Network, build_patch_discriminator, build_unet, extract_features, random_patch
from tests.conftest import make_batch


class TestUnet:
    def test_topology(self):
        spec = build_unet(base_channels=8, in_channels=1)
        kinds = [layer.kind for layer in spec.layers]
        assert kinds.count("avg_pool2") == 4
        assert kinds.count("bilinear_up2") == 4
        assert kinds.count("concat_skip") == 4
        assert all(layer.stride == 1 for layer in spec.layers if layer.kind == "conv2d")
        assert spec.spatial_multiple == 16

    def test_sinogram_shape_is_preserved(self):
        net = Network(build_unet(base_channels=2, in_channels=1), seed=0)
        assert net.forward(make_batch((1, 1, 32, 64))).shape == (1, 1, 32, 64)

    def test_cascade_input_gives_one_channel(self):
        spec = build_unet(base_channels=2, in_channels=4, role="prn_generator")
        net = Network(spec, seed=0)
        assert net.forward(make_batch((2, 4, 32, 32))).shape == (2, 1, 32, 32)

    def test_indivisible_input_cites_sixteen(self):
        net = Network(build_unet(base_channels=2, in_channels=1), seed=0)
        with pytest.raises(LayerShapeError, match="16"):
            net.forward(make_batch((1, 1, 32, 40)))

    def test_residual_starts_as_identity(self):
        spec = build_unet(base_channels=2, in_channels=4, role="prn_generator", residual_channel=3)
        net = Network(spec, seed=0)
        x = make_batch((1, 4, 16, 16))
        assert np.allclose(net.forward(x, training=False), x[:, 3:4])

    def test_widths_are_capped(self):
        spec = build_unet(base_channels=64, in_channels=1, max_channels=512)
        assert max(layer.out_channels for layer in spec.layers) == 512

    def test_desk_shape_gradient_spot_check(self):
        net = Network(build_unet(base_channels=8, in_channels=1), seed=3)
        x = np.random.default_rng(0).normal(size=(1, 1, 64, 192))
        result = network_parameter_check("desk u-net", net, x, np.random.default_rng(1), samples=3, eps=1e-8)
        assert result.passed, result


class TestPatchDiscriminator:
    def test_probability_map_shape(self):
        net = Network(build_patch_discriminator(base_channels=4), seed=0)
        out = net.forward(make_batch((1, 1, 64, 64)))
        assert out.shape == (1, 1, 16, 16)
        assert np.all((out > 0) & (out < 1))

    def test_rectangular_sinogram_input(self):
        net = Network(build_patch_discriminator(base_channels=2), seed=0)
        assert net.forward(make_batch((1, 1, 80, 48))).shape == (1, 1, 20, 12)

    def test_widths_never_exceed_256(self):
        spec = build_patch_discriminator(base_channels=512)
        assert max(layer.out_channels for layer in spec.layers if layer.kind == "conv2d") <= 256

    def test_conv_schedule(self):
        convs = [l for l in build_patch_discriminator().layers if l.kind == "conv2d"]
        assert [(c.kernel, c.stride) for c in convs] == [(3, 1), (4, 2), (4, 2), (3, 1)]

    def test_indivisible_input(self):
        net = Network(build_patch_discriminator(base_channels=2), seed=0)
        with pytest.raises(LayerShapeError, match="4"):
            net.forward(make_batch((1, 1, 18, 16)))

    def test_input_gradient(self):
        net = Network(build_patch_discriminator(base_channels=4), seed=1)
        result = network_input_check("disc", net, make_batch((1, 1, 16, 16), seed=2), np.random.default_rng(3))
        assert result.passed, result

    def test_too_wide_spec_is_rejected(self):
        spec = build_patch_discriminator(base_channels=4)
        layers = list(spec.layers)
        layers[0] = layers[0].model_copy(update={"out_channels": 300})
        with pytest.raises(ValidationError, match="256"):
            NetworkSpec(role="discriminator", layers=layers, base_channels=4, in_channels=1, out_channels=1)


class TestFeatures:
    def test_three_feature_maps_with_stride_schedule(self):
        net = Network(build_patch_discriminator(base_channels=4), seed=0)
        features = extract_features(net, make_batch((1, 1, 32, 32)))
        assert len(features) == 3
        assert [f.shape[2:] for f in features] == [(32, 32), (16, 16), (8, 8)]

    def test_deterministic(self):
        net = Network(build_patch_discriminator(base_channels=4), seed=0)
        x = make_batch((1, 1, 16, 16))
        first = extract_features(net, x)
        second = extract_features(net, x)
        assert all(np.array_equal(a.value, b.value) for a, b in zip(first, second))

    def test_forward_always_records_taps(self):
        net = Network(build_patch_discriminator(base_channels=4), seed=0)
        x = make_batch((1, 1, 16, 16))
        for training in (True, False):
            net.forward(x, training=training)
            assert [f.shape[1:] for f in net.features] == [(4, 16, 16), (8, 8, 8), (16, 4, 4)]


class TestRandomPatch:
    def test_quarter_window_with_shared_offset(self):
        a = np.random.default_rng(0).normal(size=(320, 192))
        b = a + 1.0
        pa, pb, (row, col) = random_patch((a, b), 42)
        assert pa.shape == (80, 48) and pb.shape == (80, 48)
        assert np.array_equal(pa, a[row:row + 80, col:col + 48])
        assert np.array_equal(pb, pa + 1.0)

    def test_seed_reproducible(self):
        a = np.zeros((1, 1, 32, 64))
        assert random_patch((a, a), 9)[2] == random_patch((a, a), 9)[2]

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            random_patch((np.zeros((8, 8)), np.zeros((8, 4))), 0)


class TestNetwork:
    def test_backward_without_forward(self):
        net = Network(build_patch_discriminator(base_channels=2), seed=0)
        with pytest.raises(BackwardBeforeForwardError):
            net.backward(np.zeros((1, 1, 4, 4)))

    def test_state_dict_round_trip(self):
        spec = build_patch_discriminator(base_channels=2)
        source, target = Network(spec, seed=0), Network(spec, seed=1)
        source.forward(make_batch((2, 1, 16, 16)))  # moves the running statistics
        target.load_state_dict(source.state_dict())
        x = make_batch((1, 1, 16, 16), seed=5)
        assert np.array_equal(source.forward(x, training=False), target.forward(x, training=False))

    def test_mismatched_checkpoint(self):
        net = Network(build_patch_discriminator(base_channels=2), seed=0)
        other = Network(build_patch_discriminator(base_channels=4), seed=0)
        with pytest.raises(CheckpointMismatchError):
            net.load_state_dict(other.state_dict())
        with pytest.raises(CheckpointMismatchError, match="missing"):
            net.load_state_dict({})

    def test_generator_spec_rejects_strided_conv(self):
        spec = build_unet(base_channels=2, in_channels=1)
        layers = [
            layer.model_copy(update={"stride": 2}) if layer.name == "head" else layer
            for layer in spec.layers
        ]
        with pytest.raises(ValidationError, match="stride"):
            NetworkSpec(role="sin_generator", layers=layers, base_channels=2, in_channels=1, out_channels=1)

    def test_layer_spec_validation(self):
        with pytest.raises(ValidationError):
            LayerSpec(kind="conv2d", name="bad")
