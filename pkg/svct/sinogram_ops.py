"""Measurement-domain manipulations.

Sparse sampling, angular linear upsampling, two-ends extension and
cropping, angular downsampling, and the 4-channel cascade fed to the
refinement network.

Two-ends rests on the parallel-beam identity p(theta + pi, s) =
p(theta, -s): a projection half a turn later is the detector-flipped
projection. The centred detector array makes j -> S-1-j the exact
mirror s -> -s.
"""

import logging

import numpy as np

from svct.errors import AngleGridError, GeometryMismatchError
from svct.filtering import fbp
from svct.models import ANGLE_TOLERANCE, CascadeStack, Geometry, Sinogram

logger = logging.getLogger(__name__)


def flip_detectors(data: np.ndarray) -> np.ndarray:
    """Reverse the detector axis (axis 0)."""
    return data[::-1, ...]


def _with(sino: Sinogram, data: np.ndarray, angles) -> Sinogram:
    return Sinogram(
        data=data,
        angles=tuple(float(a) for a in angles),
        detector_spacing=sino.detector_spacing,
    )


def downsample_angular(sino: Sinogram, factor: int) -> Sinogram:
    """Keep every factor-th angle column starting at index 0."""
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    return _with(sino, sino.data[:, ::factor].copy(), sino.angles[::factor])


def sparse_sample(full: Sinogram, every_k: int) -> Sinogram:
    """Simulate a sparse-view acquisition by keeping angles 0, k, 2k, ..."""
    if every_k < 1:
        raise ValueError(f"every_k must be >= 1, got {every_k}")
    return downsample_angular(full, every_k)


def linear_upsample_angular(sparse: Sinogram, target_angles: int) -> Sinogram:
    """Linear interpolation along the angle axis onto i*pi/target_angles.

    Angles past the last measured view are interpolated towards a virtual
    view at first_angle + pi (the flipped first column); angles before the
    first measured view towards last_angle - pi (the flipped last column).
    """
    grid = np.arange(target_angles, dtype=np.float64) * np.pi / target_angles
    nodes = sparse.angle_array
    if nodes.size == 0:
        raise AngleGridError("sparse sinogram has no angles")

    # Every measured angle must sit on the target grid.
    positions = np.searchsorted(grid, nodes - ANGLE_TOLERANCE)
    positions = np.clip(positions, 0, target_angles - 1)
    if np.any(np.abs(grid[positions] - nodes) > ANGLE_TOLERANCE):
        raise AngleGridError(
            f"target grid of {target_angles} angles does not contain the sparse angles"
        )

    ext_angles = np.concatenate([[nodes[-1] - np.pi], nodes, [nodes[0] + np.pi]])
    ext_data = np.concatenate(
        [flip_detectors(sparse.data[:, -1:]), sparse.data, flip_detectors(sparse.data[:, :1])],
        axis=1,
    )
    ext_angles[1:-1] = grid[positions]  # snap measured nodes onto the grid

    upper = np.searchsorted(ext_angles, grid, side="right")
    upper = np.clip(upper, 1, ext_angles.size - 1)
    lower = upper - 1
    span = ext_angles[upper] - ext_angles[lower]
    weight = (grid - ext_angles[lower]) / span

    data = ext_data[:, lower] * (1.0 - weight) + ext_data[:, upper] * weight
    # Measured views are copied, not recomputed.
    data[:, positions] = sparse.data
    return _with(sparse, data, grid)


def two_ends_extend(sino: Sinogram, pad: int) -> Sinogram:
    """[flipped last pad views | original | flipped first pad views]."""
    if pad < 0 or pad >= sino.num_angles:
        raise ValueError(f"pad must be in [0, {sino.num_angles}), got {pad}")
    if pad == 0:
        return _with(sino, sino.data.copy(), sino.angles)
    angles = sino.angle_array
    head = flip_detectors(sino.data[:, -pad:])
    tail = flip_detectors(sino.data[:, :pad])
    data = np.concatenate([head, sino.data, tail], axis=1)
    new_angles = np.concatenate([angles[-pad:] - np.pi, angles, angles[:pad] + np.pi])
    return _with(sino, data, new_angles)


def two_ends_crop(sino: Sinogram, pad: int) -> Sinogram:
    """Drop `pad` views from each end; inverse of two_ends_extend."""
    if pad < 0 or sino.num_angles <= 2 * pad:
        raise ValueError(f"cannot crop {pad} views from each end of {sino.num_angles}")
    if pad == 0:
        return _with(sino, sino.data.copy(), sino.angles)
    return _with(sino, sino.data[:, pad:-pad].copy(), sino.angles[pad:-pad])


def build_cascade(sparse: Sinogram, inpainted_full: Sinogram, geom: Geometry) -> CascadeStack:
    """FBPs of the sparse, 4x-, 2x-downsampled and full inpainted sinograms."""
    if inpainted_full.data.shape != (geom.num_detectors, geom.num_angles):
        raise GeometryMismatchError(
            f"inpainted sinogram is {inpainted_full.data.shape}, expected "
            f"{(geom.num_detectors, geom.num_angles)}; crop two-ends padding first"
        )
    if not np.allclose(inpainted_full.angle_array, geom.angle_array, atol=ANGLE_TOLERANCE):
        raise GeometryMismatchError("inpainted sinogram angles differ from the base grid")
    if sparse.num_detectors != geom.num_detectors:
        raise GeometryMismatchError(
            f"sparse sinogram has {sparse.num_detectors} detectors, expected {geom.num_detectors}"
        )

    sources = [
        sparse,
        downsample_angular(inpainted_full, 4),
        downsample_angular(inpainted_full, 2),
        inpainted_full,
    ]
    channels = [fbp(s, geom.with_angles(s.angles)).pixels for s in sources]
    logger.debug("cascade built from %s views", [s.num_angles for s in sources])
    return CascadeStack(
        channels=np.stack(channels),
        source_view_counts=tuple(s.num_angles for s in sources),
    )
