"""Tests for the parallel-beam projector and its adjoint."""

import numpy as np
import pytest

from svct.errors import GeometryMismatchError
from svct.geometry import backproject, radon_forward, roi_mask
from svct.models import Geometry, Image, Sinogram
from svct.phantoms import random_ellipses
from tests.conftest import make_block, make_disk, make_smooth


class TestRadonForward:
    def test_zero_image_gives_zero_sinogram(self, geom45):
        sino = radon_forward(Image(pixels=np.zeros((64, 64))), geom45)
        assert sino.data.shape == (64, 45)
        assert not sino.data.any()

    def test_disk_center_ray_is_diameter(self, geom45):
        sino = radon_forward(make_disk(64, 20.0), geom45)
        # s = 0 sits between detectors 31 and 32
        center = 0.5 * (sino.data[31] + sino.data[32])
        assert np.all(np.abs(center - 40.0) <= 0.02 * 40.0)

    def test_mass_conservation(self, geom45):
        sino = radon_forward(make_block(), geom45)
        sums = sino.data.sum(axis=0) * geom45.detector_spacing
        # axis-aligned views sample every pixel exactly once
        assert sums[0] == pytest.approx(100.0, abs=1e-9)
        assert sums[geom45.num_angles // 2 + 1] == pytest.approx(100.0, rel=0.01)
        assert np.all(np.abs(sums - 100.0) <= 1.0)

    @pytest.mark.parametrize("top, left", [(20, 27), (12, 14), (40, 38)])
    def test_mass_conservation_on_a_dense_grid(self, geom180, top, left):
        sino = radon_forward(make_block(top=top, left=left), geom180)
        sums = sino.data.sum(axis=0) * geom180.detector_spacing
        assert np.all(np.abs(sums - 100.0) <= 1.0)

    def test_linearity(self, geom45):
        x = random_ellipses(64, 6, 1)
        z = random_ellipses(64, 6, 2)
        combined = Image(pixels=2.0 * x.pixels - 0.5 * z.pixels)
        lhs = radon_forward(combined, geom45).data
        rhs = 2.0 * radon_forward(x, geom45).data - 0.5 * radon_forward(z, geom45).data
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)

    def test_rotationally_symmetric_phantom_gives_equal_columns(self, geom45):
        sino = radon_forward(make_smooth(64, offset=(0.0, 0.0)), geom45).data
        deviation = np.abs(sino - sino[:, :1]).max()
        assert deviation <= 1e-2 * np.abs(sino).max()

    def test_flip_identity_half_turn(self):
        phantom = make_smooth(64)
        angles = np.array([0.1, 0.7, 1.3, 2.2])
        direct = radon_forward(phantom, Geometry(num_detectors=64, num_angles=4, angles=tuple(angles)))
        turned = radon_forward(
            phantom, Geometry(num_detectors=64, num_angles=4, angles=tuple(angles + np.pi))
        )
        interior = slice(4, 60)
        error = np.abs(turned.data[::-1][interior] - direct.data[interior]).max()
        assert error <= 1e-3 * np.abs(direct.data).max()

    def test_image_size_mismatch_raises(self, geom45):
        with pytest.raises(GeometryMismatchError, match="32x32"):
            radon_forward(Image(pixels=np.zeros((32, 32))), geom45)


class TestBackproject:
    def test_zero_sinogram_gives_zero_image(self, geom45):
        image = backproject(Sinogram(data=np.zeros((64, 45)), angles=geom45.angles), geom45)
        assert not image.pixels.any()

    def test_dot_product_adjoint(self, geom45):
        rng = np.random.default_rng(0)
        for _ in range(10):
            x = Image(pixels=rng.normal(size=(64, 64)))
            y = Sinogram(data=rng.normal(size=(64, 45)), angles=geom45.angles)
            ax = radon_forward(x, geom45).data
            aty = backproject(y, geom45).pixels
            gap = abs(np.vdot(ax, y.data) - np.vdot(x.pixels, aty))
            assert gap / (np.linalg.norm(ax) * np.linalg.norm(y.data)) <= 1e-6

    def test_single_angle_smear_is_constant_along_rays(self):
        geom = Geometry.parallel(64, 4)
        data = np.zeros((64, 4))
        data[:, 0] = 3.0
        image = backproject(Sinogram(data=data, angles=geom.angles), geom).pixels
        # theta = 0: rays run along the rows, so every interior column is constant
        interior = image[:, 8:56]
        assert np.allclose(interior, interior[:1], atol=1e-12)
        assert np.allclose(interior, 3.0)

    def test_shape_mismatch_raises(self, geom45):
        with pytest.raises(GeometryMismatchError):
            backproject(Sinogram(data=np.zeros((64, 10)), angles=tuple(range(10))), geom45)


class TestRoiMask:
    def test_radius_and_center(self):
        mask = roi_mask(64)
        assert mask[32, 32] and mask[0, 32] and mask[32, 0]
        assert not mask[0, 0]
        assert mask.sum() == pytest.approx(np.pi * 32**2, rel=0.02)

    def test_symmetric(self):
        mask = roi_mask(33)
        assert np.array_equal(mask, mask[::-1]) and np.array_equal(mask, mask.T)
