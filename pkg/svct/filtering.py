"""Ram-Lak ramp filtering and filtered backprojection.

The discrete kernel is the closed form
    h(0) = 1 / (4 ds^2),  h(n) = 0 for even n != 0,
    h(n) = -1 / (pi^2 n^2 ds^2) for odd n,
applied along the detector axis as q[k] = ds * sum_n p[n] h[k - n] with
zero-padded borders. Two implementations are provided and must agree:
a spatial one (Toeplitz matrix product) and a frequency one (FFT product
with the transfer function of the same taps, padded to avoid wrap).

FBP scaling: fbp = (pi / num_angles) * backproject(ramp(sino)). With the
ds-scaled convolution this reconstructs a unit disk to ~1.
"""

import logging
from functools import lru_cache
from typing import Literal

import numpy as np
import scipy.fft
import scipy.linalg

from svct.errors import AngleGridError
from svct.geometry import backproject
from svct.models import ANGLE_TOLERANCE, Geometry, Image, RampKernel, Sinogram

logger = logging.getLogger(__name__)


def ramp_kernel(half_width: int, spacing: float = 1.0) -> RampKernel:
    """Closed-form Ram-Lak taps for n = -half_width..half_width."""
    if half_width < 1:
        raise ValueError(f"half_width must be >= 1, got {half_width}")
    if spacing <= 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    n = np.arange(-half_width, half_width + 1)
    taps = np.zeros(n.shape, dtype=np.float64)
    taps[n == 0] = 1.0 / (4.0 * spacing**2)
    odd = n % 2 != 0
    taps[odd] = -1.0 / (np.pi**2 * n[odd].astype(np.float64) ** 2 * spacing**2)
    return RampKernel(half_width=half_width, taps=taps, spacing=spacing)


def _tap(kernel: RampKernel, offsets: np.ndarray) -> np.ndarray:
    """h(offset), zero beyond the kernel support."""
    inside = np.abs(offsets) <= kernel.half_width
    values = np.zeros(offsets.shape, dtype=np.float64)
    values[inside] = kernel.taps[offsets[inside] + kernel.half_width]
    return values


def ramp_matrix(kernel: RampKernel, n: int) -> np.ndarray:
    """n x n matrix M with (M p)[k] = ds * sum_j p[j] h(k - j)."""
    return _cached_ramp_matrix(kernel.half_width, kernel.spacing, n)


@lru_cache(maxsize=16)
def _cached_ramp_matrix(half_width: int, spacing: float, n: int) -> np.ndarray:
    kernel = ramp_kernel(half_width, spacing)
    column = _tap(kernel, np.arange(n))
    matrix = spacing * scipy.linalg.toeplitz(column)  # h is symmetric
    matrix.setflags(write=False)
    return matrix


def ramp_transfer(kernel: RampKernel, n_fft: int) -> np.ndarray:
    """Real transfer function (rfft layout) of the taps on an n_fft circle."""
    if n_fft < 2 * kernel.half_width + 1:
        raise ValueError("n_fft too small for the kernel support")
    circular = np.zeros(n_fft, dtype=np.float64)
    circular[: kernel.half_width + 1] = kernel.taps[kernel.half_width:]
    circular[n_fft - kernel.half_width:] = kernel.taps[: kernel.half_width]
    return scipy.fft.rfft(circular).real


def _next_pow2(value: int) -> int:
    return 1 << max(int(value) - 1, 0).bit_length()


def filter_columns(
    data: np.ndarray,
    kernel: RampKernel,
    method: Literal["spatial", "frequency"] = "spatial",
    axis: int = 0,
) -> np.ndarray:
    """Ramp-filter an array along `axis` (the detector axis)."""
    moved = np.moveaxis(np.asarray(data), axis, 0)
    n = moved.shape[0]
    if method == "spatial":
        flat = moved.reshape(n, -1)
        out = ramp_matrix(kernel, n) @ flat
    elif method == "frequency":
        n_fft = max(_next_pow2(2 * n), _next_pow2(2 * kernel.half_width + 1))
        transfer = ramp_transfer(kernel, n_fft)
        flat = moved.reshape(n, -1)
        spectrum = scipy.fft.rfft(flat, n=n_fft, axis=0) * transfer[:, None]
        out = kernel.spacing * scipy.fft.irfft(spectrum, n=n_fft, axis=0)[:n]
    else:
        raise ValueError(f"unknown ramp filter method '{method}'")
    return np.moveaxis(out.reshape(moved.shape), 0, axis)


def apply_ramp(
    sino: Sinogram, method: Literal["spatial", "frequency"] = "spatial"
) -> Sinogram:
    """Convolve every angle column with the full-support Ram-Lak kernel."""
    half_width = max(sino.num_detectors - 1, 1)
    kernel = ramp_kernel(half_width, sino.detector_spacing)
    filtered = filter_columns(sino.data, kernel, method=method, axis=0)
    return Sinogram(data=filtered, angles=sino.angles, detector_spacing=sino.detector_spacing)


def fbp(
    sino: Sinogram, geom: Geometry, method: Literal["spatial", "frequency"] = "spatial"
) -> Image:
    """Filtered backprojection over a [0, pi) angle grid."""
    angles = sino.angle_array
    if angles.size and (angles.min() < -ANGLE_TOLERANCE or angles.max() > np.pi - ANGLE_TOLERANCE):
        raise AngleGridError(
            "fbp needs angles in [0, pi); crop two-ends padding with two_ends_crop first"
        )
    filtered = apply_ramp(sino, method=method)
    image = backproject(filtered, geom)
    return Image(pixels=image.pixels * (np.pi / sino.num_angles))
