"""Synthetic phantoms standing in for clinical scans.

Ellipses are given in normalized coordinates on [-1, 1]^2 (x to the
right, y up) and composed additively, then clamped to [0, 1]. The
Shepp-Logan table is the high-contrast "modified" variant:

    intensity  a      b      x0     y0      phi(deg)
      1.0     .69    .92    0       0        0
     -0.8     .6624  .874   0      -.0184    0
     -0.2     .11    .31    .22     0      -18
     -0.2     .16    .41   -.22     0       18
      0.1     .21    .25    0       .35      0
      0.1     .046   .046   0       .1       0
      0.1     .046   .046   0      -.1       0
      0.1     .046   .023  -.08    -.605     0
      0.1     .023   .023   0      -.606     0
      0.1     .023   .046   .06    -.605     0
"""

import math

import numpy as np

from svct.models import Image, PhantomSpec

SHEPP_LOGAN_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


def pixel_coordinates(size: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalized (x, y) of every pixel centre; row 0 is the top (y = +1)."""
    centers = (np.arange(size) - (size - 1) / 2.0) / (size / 2.0)
    x = np.broadcast_to(centers[None, :], (size, size))
    y = np.broadcast_to(-centers[:, None], (size, size))
    return x, y


def rasterize_ellipses(size: int, ellipses) -> np.ndarray:
    """Additive composition of (intensity, a, b, x0, y0, phi_deg) ellipses, clamped to [0, 1]."""
    x, y = pixel_coordinates(size)
    pixels = np.zeros((size, size), dtype=np.float64)
    for intensity, a, b, x0, y0, phi in ellipses:
        phi = math.radians(phi)
        dx, dy = x - x0, y - y0
        u = dx * math.cos(phi) + dy * math.sin(phi)
        v = -dx * math.sin(phi) + dy * math.cos(phi)
        pixels[(u / a) ** 2 + (v / b) ** 2 <= 1.0] += intensity
    return np.clip(pixels, 0.0, 1.0)


def shepp_logan(size: int) -> Image:
    return Image(pixels=rasterize_ellipses(size, SHEPP_LOGAN_ELLIPSES))


def random_ellipse_table(count: int, rng: np.random.Generator) -> list[tuple[float, ...]]:
    """A bright body ellipse followed by count - 1 inner features.

    Draw order per ellipse: semi-axes, centre, angle, intensity.
    """
    table = []
    a, b = rng.uniform(0.6, 0.85, size=2)
    table.append((float(rng.uniform(0.6, 1.0)), float(a), float(b), 0.0, 0.0, float(rng.uniform(0, 180))))
    for _ in range(count - 1):
        axes = rng.uniform(0.05, 0.3, size=2)
        radius = rng.uniform(0.0, 0.45)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        phi = rng.uniform(0.0, 180.0)
        intensity = rng.uniform(-0.4, 0.4)
        table.append((
            float(intensity), float(axes[0]), float(axes[1]),
            float(radius * math.cos(angle)), float(radius * math.sin(angle)), float(phi),
        ))
    return table


def random_ellipses(size: int, count: int, seed: int) -> Image:
    rng = np.random.default_rng(seed)
    return Image(pixels=rasterize_ellipses(size, random_ellipse_table(count, rng)))


def make_phantom(spec: PhantomSpec) -> Image:
    if spec.kind == "shepp_logan":
        return shepp_logan(spec.size)
    return random_ellipses(spec.size, spec.ellipse_count, spec.seed)


def phantom_set(size: int, count: int, ellipse_count: int, seed: int) -> list[Image]:
    """`count` random phantoms with per-phantom seeds drawn from one stream."""
    seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, size=count)
    return [random_ellipses(size, ellipse_count, int(s)) for s in seeds]
