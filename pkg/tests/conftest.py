"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from svct.models import Geometry, Image, NetworkConfig, PipelineConfig, Sinogram, TrainConfig
from svct.phantoms import shepp_logan


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end training runs (deselect with -m 'not slow')")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def geom45():
    return Geometry.parallel(64, 45)


@pytest.fixture
def geom180():
    return Geometry.parallel(64, 180)


@pytest.fixture
def phantom64():
    return shepp_logan(64)


@pytest.fixture
def small_pipeline():
    """32-pixel images, 48 views sparsified by 4: quick enough for training tests."""
    return PipelineConfig(
        image_size=32, full_views=48, sparse_every=4, te_pad=8,
        num_phantoms=6, held_out=2, ellipse_count=5,
    )


@pytest.fixture
def small_network():
    return NetworkConfig(sin_base_channels=2, prn_base_channels=2, disc_base_channels=4)


@pytest.fixture
def quick_train():
    return TrainConfig(
        iterations=6, schedule_period_k=2, batch_size=2, seed=5,
        augment_copies=0, learning_rate=1e-3, log_every=2,
    )


def make_disk(size=64, radius=20.0, value=1.0, center=None, supersample=8) -> Image:
    """Disk with anti-aliased edges (pixel coverage from a supersample grid)."""
    c = (size - 1) / 2.0 if center is None else center
    offsets = (np.arange(supersample) + 0.5) / supersample - 0.5
    rows = np.arange(size)[:, None, None, None] + offsets[None, None, :, None]
    cols = np.arange(size)[None, :, None, None] + offsets[None, None, None, :]
    inside = (rows - c) ** 2 + (cols - c) ** 2 <= radius**2
    return Image(pixels=value * inside.mean(axis=(2, 3)))


def make_block(size=64, top=20, left=27, height=10, width=10) -> Image:
    pixels = np.zeros((size, size))
    pixels[top:top + height, left:left + width] = 1.0
    return Image(pixels=pixels)


def make_smooth(size=64, sigma=8.0, offset=(6.0, -4.0)) -> Image:
    """Off-centre Gaussian blob: smooth and not rotationally symmetric."""
    c = (size - 1) / 2.0
    rows, cols = np.mgrid[0:size, 0:size]
    r2 = (rows - c - offset[0]) ** 2 + (cols - c - offset[1]) ** 2
    return Image(pixels=np.exp(-r2 / (2.0 * sigma**2)) * (r2 <= (size / 2.0 - 4) ** 2))


def make_sinogram(detectors=64, angles=45, seed=0) -> Sinogram:
    data = np.random.default_rng(seed).normal(size=(detectors, angles))
    return Sinogram(data=data, angles=Geometry.parallel(detectors, angles).angles)


def make_batch(shape=(2, 1, 16, 16), seed=0, low=0.1) -> np.ndarray:
    """Values bounded away from zero, both signs."""
    rng = np.random.default_rng(seed)
    magnitude = rng.uniform(low, 1.0, size=shape)
    return magnitude * rng.choice([-1.0, 1.0], size=shape)
