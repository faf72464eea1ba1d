"""Tests for the learning-free baselines: sparse FBP, linear FBP and FISTA-TV."""

import numpy as np
import pytest

from svct.baselines import (
    estimate_lipschitz,
    fista_grid_search,
    fista_tv,
    linear_fbp_baseline,
    sparse_fbp_baseline,
    total_variation,
    tv_prox,
)
from svct.errors import GeometryMismatchError
from svct.geometry import radon_forward
from svct.metrics import psnr_roi
from svct.models import FistaConfig, Geometry, Image
from svct.sinogram_ops import sparse_sample
from tests.conftest import make_block


@pytest.fixture
def sparse16(phantom64):
    geom = Geometry.parallel(64, 16)
    return radon_forward(phantom64, geom), geom


class TestClassicalBaselines:
    def test_sparse_fbp_uses_measured_views(self, phantom64, geom180):
        sparse = sparse_sample(radon_forward(phantom64, geom180), 8)
        image = sparse_fbp_baseline(sparse, geom180)
        assert image.pixels.shape == (64, 64)

    def test_linear_beats_sparse(self, phantom64, geom180):
        sparse = sparse_sample(radon_forward(phantom64, geom180), 8)
        linear = psnr_roi(linear_fbp_baseline(sparse, geom180), phantom64)
        assert linear > psnr_roi(sparse_fbp_baseline(sparse, geom180), phantom64)


class TestTotalVariation:
    def test_constant_has_zero_tv(self):
        assert total_variation(np.full((8, 8), 3.0)) == 0.0

    def test_block_perimeter(self):
        """A unit square of side 10 has TV close to its perimeter."""
        tv = total_variation(make_block(32, 10, 10, 10, 10))
        assert 36.0 <= tv <= 40.0

    def test_prox_reduces_tv_and_stays_close(self):
        rng = np.random.default_rng(0)
        noisy = make_block(32).pixels + rng.normal(scale=0.1, size=(32, 32))
        smoothed = tv_prox(noisy, weight=0.1, iterations=50)
        assert total_variation(smoothed) < total_variation(noisy)
        assert np.abs(smoothed.mean() - noisy.mean()) < 1e-10

    def test_zero_weight_is_identity(self):
        x = np.random.default_rng(1).normal(size=(6, 6))
        assert np.array_equal(tv_prox(x, 0.0), x)


class TestLipschitz:
    def test_bounds_rayleigh_quotients(self, geom45):
        """The estimate (padded by 1%) stays above every sampled Rayleigh quotient."""
        lipschitz = estimate_lipschitz(geom45, iterations=50)
        rng = np.random.default_rng(3)
        for _ in range(5):
            v = rng.normal(size=(64, 64))
            av = radon_forward(Image(pixels=v), geom45).data
            assert float(np.sum(av**2) / np.sum(v**2)) <= lipschitz

    def test_converged_within_one_percent(self, geom45):
        short = estimate_lipschitz(geom45, iterations=60, seed=0)
        long = estimate_lipschitz(geom45, iterations=120, seed=1)
        assert short == pytest.approx(long, rel=0.01)


class TestFista:
    def test_beats_sparse_fbp_by_three_db(self, sparse16, phantom64):
        sino, geom = sparse16
        result = fista_tv(sino, geom, FistaConfig(tv_weight=10.0, outer_iterations=100))
        baseline = psnr_roi(sparse_fbp_baseline(sino, geom), phantom64)
        assert psnr_roi(result.image, phantom64) >= baseline + 3.0
        assert result.objective[-1] < result.objective[0]

    def test_objective_never_increases_with_restarts(self, sparse16):
        sino, geom = sparse16
        result = fista_tv(sino, geom, FistaConfig(tv_weight=10.0, outer_iterations=30))
        assert len(result.objective) == 31
        assert all(b <= a for a, b in zip(result.objective, result.objective[1:]))
        assert result.restarts >= 0 and result.lipschitz > 0

    def test_least_squares_on_dense_views(self):
        """tv_weight = 0 shrinks the residual at least tenfold on a well-posed problem."""
        phantom = make_block(32, 8, 12, 12, 8)
        geom = Geometry.parallel(32, 64)
        sino = radon_forward(phantom, geom)
        cfg = FistaConfig(tv_weight=0.0, outer_iterations=60, nonnegativity=False)
        result = fista_tv(sino, geom, cfg)
        initial = sparse_fbp_baseline(sino, geom).pixels
        before = np.linalg.norm(radon_forward(Image(pixels=initial), geom).data - sino.data)
        after = np.linalg.norm(radon_forward(result.image, geom).data - sino.data)
        assert after * 10.0 <= before

    def test_nonnegativity(self, sparse16):
        sino, geom = sparse16
        result = fista_tv(sino, geom, FistaConfig(outer_iterations=5))
        assert result.image.pixels.min() >= 0.0

    def test_fixed_step(self, sparse16):
        sino, geom = sparse16
        result = fista_tv(sino, geom, FistaConfig(outer_iterations=3, step_size=1e-4))
        assert result.lipschitz == pytest.approx(1e4)

    def test_geometry_mismatch(self, sparse16):
        sino, _ = sparse16
        with pytest.raises(GeometryMismatchError):
            fista_tv(sino, Geometry.parallel(64, 20))

    def test_grid_search_keeps_the_best(self, sparse16, phantom64):
        sino, geom = sparse16
        cfg = FistaConfig(outer_iterations=20)
        search = fista_grid_search(sino, geom, phantom64, [1.0, 10.0, 1000.0], cfg)
        assert set(search.scores) == {1.0, 10.0, 1000.0}
        assert search.scores[search.best_weight] == max(search.scores.values())
        assert psnr_roi(search.best.image, phantom64) == pytest.approx(search.scores[search.best_weight])

    def test_grid_search_needs_weights(self, sparse16, phantom64):
        sino, geom = sparse16
        with pytest.raises(ValueError):
            fista_grid_search(sino, geom, phantom64, [])

    def test_step_size_validation(self):
        with pytest.raises(ValueError):
            FistaConfig(step_size=-1.0)
