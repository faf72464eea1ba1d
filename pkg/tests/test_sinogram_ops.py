"""Tests for sparse sampling, angular upsampling, two-ends extension and the cascade."""

import numpy as np
import pytest

from svct.errors import AngleGridError, GeometryMismatchError
from svct.filtering import fbp
from svct.geometry import radon_forward
from svct.metrics import psnr_roi
from svct.models import Geometry
from svct.phantoms import shepp_logan
from svct.sinogram_ops import (
    build_cascade,
    downsample_angular,
    flip_detectors,
    linear_upsample_angular,
    sparse_sample,
    two_ends_crop,
    two_ends_extend,
)
from tests.conftest import make_sinogram, make_smooth


@pytest.fixture
def full180(geom180):
    return radon_forward(make_smooth(64), geom180)


class TestSparseSample:
    def test_every_eighth_view(self, full180):
        sparse = sparse_sample(full180, 8)
        assert sparse.data.shape == (64, 23)
        assert np.allclose(np.degrees(sparse.angle_array), np.arange(0, 177, 8))
        assert np.array_equal(sparse.data, full180.data[:, ::8])

    def test_k_one_is_identity(self, full180):
        assert np.array_equal(sparse_sample(full180, 1).data, full180.data)

    def test_composition(self, full180):
        twice = sparse_sample(sparse_sample(full180, 2), 2)
        assert np.array_equal(twice.data, sparse_sample(full180, 4).data)
        assert twice.angles == sparse_sample(full180, 4).angles

    def test_invalid_k(self, full180):
        with pytest.raises(ValueError):
            sparse_sample(full180, 0)


class TestLinearUpsample:
    def test_measured_views_are_kept(self, full180):
        sparse = sparse_sample(full180, 8)
        up = linear_upsample_angular(sparse, 180)
        assert up.data.shape == (64, 180)
        assert np.array_equal(up.data[:, ::8], sparse.data)

    def test_midpoint_is_mean_and_wraps_with_flip(self):
        full = make_sinogram(16, 8, seed=2)
        sparse = sparse_sample(full, 2)
        up = linear_upsample_angular(sparse, 8).data
        cols = sparse.data
        assert np.allclose(up[:, 1], 0.5 * (cols[:, 0] + cols[:, 1]))
        assert np.allclose(up[:, 7], 0.5 * (cols[:, 3] + flip_detectors(cols[:, 0])))

    def test_trailing_views_follow_true_projections(self, full180):
        up = linear_upsample_angular(sparse_sample(full180, 8), 180).data
        for index in (177, 178, 179):
            truth = full180.data[:, index]
            assert np.linalg.norm(up[:, index] - truth) <= 0.05 * np.linalg.norm(truth)

    def test_grid_must_contain_sparse_angles(self, geom45, phantom64):
        sparse = radon_forward(phantom64, geom45)
        with pytest.raises(AngleGridError):
            linear_upsample_angular(sparse, 100)


class TestTwoEnds:
    def test_adds_two_pad_columns(self, full180):
        extended = two_ends_extend(full180, 6)
        assert extended.data.shape == (64, 192)
        assert np.array_equal(extended.data[:, 6:-6], full180.data)
        assert np.array_equal(extended.data[:, :6], full180.data[::-1, -6:])
        assert np.array_equal(extended.data[:, -6:], full180.data[::-1, :6])
        assert np.all(np.diff(extended.angle_array) > 0)

    def test_pad_zero_is_identity(self, full180):
        assert np.array_equal(two_ends_extend(full180, 0).data, full180.data)
        assert np.array_equal(two_ends_crop(full180, 0).data, full180.data)

    def test_extended_views_match_simulation_past_pi(self, full180):
        extended = two_ends_extend(full180, 6)
        phantom = make_smooth(64)
        geom = Geometry(num_detectors=64, num_angles=6, angles=tuple(extended.angles[-6:]))
        direct = radon_forward(phantom, geom).data
        assert np.abs(extended.data[:, -6:] - direct).max() <= 1e-3 * np.abs(direct).max()

    def test_crop_inverts_extend(self, full180):
        cropped = two_ends_crop(two_ends_extend(full180, 6), 6)
        assert np.array_equal(cropped.data, full180.data)
        assert cropped.angles == full180.angles

    def test_invalid_pads(self, full180):
        with pytest.raises(ValueError):
            two_ends_extend(full180, 180)
        with pytest.raises(ValueError):
            two_ends_crop(full180, 90)

    def test_flip_is_an_involution(self, full180):
        assert np.array_equal(flip_detectors(flip_detectors(full180.data)), full180.data)


class TestDownsample:
    def test_factors(self, full180):
        assert downsample_angular(full180, 2).num_angles == 90
        assert downsample_angular(full180, 4).num_angles == 45
        assert np.array_equal(downsample_angular(full180, 1).data, full180.data)
        twice = downsample_angular(downsample_angular(full180, 2), 2)
        assert np.array_equal(twice.data, downsample_angular(full180, 4).data)


class TestCascade:
    def test_channels_from_true_sinogram(self):
        phantom = shepp_logan(128)
        geom = Geometry.parallel(128, 180)
        full = radon_forward(phantom, geom)
        sparse = sparse_sample(full, 8)
        cascade = build_cascade(sparse, full, geom)
        assert cascade.channels.shape == (4, 128, 128)
        assert cascade.source_view_counts == (23, 45, 90, 180)
        assert np.array_equal(cascade.channels[3], fbp(full, geom).pixels)
        scores = [psnr_roi(channel, phantom) for channel in cascade.channels]
        assert scores == sorted(scores)

    def test_padded_inpainting_is_rejected(self, full180, geom180):
        sparse = sparse_sample(full180, 8)
        with pytest.raises(GeometryMismatchError, match="crop"):
            build_cascade(sparse, two_ends_extend(full180, 6), geom180)
