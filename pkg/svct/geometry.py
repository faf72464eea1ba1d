"""Parallel-beam forward projector and its exact adjoint.

Discretization (Joseph-style, ray driven):
  - Pixel (row r, col k) sits at x = k - c, y = r - c with c = (S-1)/2.
  - The ray of detector j at angle theta is {p : p . w = s_j} with
    w = (cos theta, sin theta).
  - When |cos| >= |sin| the ray is stepped one pixel row at a time and
    sampled by linear interpolation between the two nearest columns,
    each sample weighted by the path length 1/|cos|; otherwise the roles
    of rows and columns swap.
  - Samples falling outside the image contribute zero.

backproject() scatters with exactly the same (index, weight) pairs, so
the pair passes the dot-product test to rounding error. Both operators
work one angle at a time on disjoint output columns / a deterministic
bincount, so results do not depend on any scheduling.
"""

import logging

import numpy as np

from svct.errors import GeometryMismatchError
from svct.models import Geometry, Image, Sinogram

logger = logging.getLogger(__name__)

# Near 45 degrees both stepping directions are valid; this bias keeps the
# choice identical for theta and theta + pi.
_AXIS_TIE_SLACK = 1e-9


def _ray_weights(geom: Geometry, theta: float):
    """Interpolation indices and weights of every ray at one angle.

    Returns (idx0, idx1, w0, w1), each shaped (num_detectors, image_size),
    holding flat pixel indices and path-length-scaled weights. Invalid
    neighbours carry weight zero and a clipped (harmless) index.
    """
    size = geom.image_size
    center = (size - 1) / 2.0
    s = geom.detector_positions()[:, None]
    steps = np.arange(size, dtype=np.float64)[None, :]
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    if abs(cos_t) + _AXIS_TIE_SLACK >= abs(sin_t):
        # Step over rows, interpolate along columns.
        y = steps - center
        coord = (s - y * sin_t) / cos_t + center
        path = 1.0 / abs(cos_t)
        lower = np.floor(coord)
        frac = coord - lower
        lower = lower.astype(np.int64)
        rows = np.broadcast_to(steps.astype(np.int64), lower.shape)
        idx0 = rows * size + np.clip(lower, 0, size - 1)
        idx1 = rows * size + np.clip(lower + 1, 0, size - 1)
    else:
        # Step over columns, interpolate along rows.
        x = steps - center
        coord = (s - x * cos_t) / sin_t + center
        path = 1.0 / abs(sin_t)
        lower = np.floor(coord)
        frac = coord - lower
        lower = lower.astype(np.int64)
        cols = np.broadcast_to(steps.astype(np.int64), lower.shape)
        idx0 = np.clip(lower, 0, size - 1) * size + cols
        idx1 = np.clip(lower + 1, 0, size - 1) * size + cols

    w0 = np.where((lower >= 0) & (lower <= size - 1), (1.0 - frac) * path, 0.0)
    w1 = np.where((lower + 1 >= 0) & (lower + 1 <= size - 1), frac * path, 0.0)
    return idx0, idx1, w0, w1


def _check_image(image: Image, geom: Geometry) -> None:
    if image.size != geom.image_size:
        raise GeometryMismatchError(
            f"image is {image.size}x{image.size} but geometry expects "
            f"{geom.image_size}x{geom.image_size}"
        )


def _check_sinogram(sino: Sinogram, geom: Geometry) -> None:
    if sino.data.shape != (geom.num_detectors, geom.num_angles):
        raise GeometryMismatchError(
            f"sinogram is {sino.data.shape[0]}x{sino.data.shape[1]} but geometry expects "
            f"{geom.num_detectors}x{geom.num_angles}"
        )


def radon_forward(image: Image, geom: Geometry) -> Sinogram:
    """Line integrals of `image` for every detector and angle of `geom`."""
    _check_image(image, geom)
    flat = image.pixels.ravel()
    data = np.empty((geom.num_detectors, geom.num_angles), dtype=np.float64)
    for i, theta in enumerate(geom.angles):
        idx0, idx1, w0, w1 = _ray_weights(geom, theta)
        data[:, i] = (flat[idx0] * w0 + flat[idx1] * w1).sum(axis=1)
    return Sinogram(data=data, angles=geom.angles, detector_spacing=geom.detector_spacing)


def backproject(sino: Sinogram, geom: Geometry) -> Image:
    """Algebraic adjoint of radon_forward on the same geometry."""
    _check_sinogram(sino, geom)
    npix = geom.image_size * geom.image_size
    flat = np.zeros(npix, dtype=np.float64)
    for i, theta in enumerate(geom.angles):
        idx0, idx1, w0, w1 = _ray_weights(geom, theta)
        column = sino.data[:, i][:, None]
        flat += np.bincount(idx0.ravel(), weights=(w0 * column).ravel(), minlength=npix)
        flat += np.bincount(idx1.ravel(), weights=(w1 * column).ravel(), minlength=npix)
    return Image(pixels=flat.reshape(geom.image_size, geom.image_size))


def roi_mask(size: int) -> np.ndarray:
    """Disk of radius size/2 centred at ((size-1)/2, (size-1)/2), boundary included."""
    center = (size - 1) / 2.0
    rows, cols = np.mgrid[0:size, 0:size]
    return (rows - center) ** 2 + (cols - center) ** 2 <= (size / 2.0) ** 2
