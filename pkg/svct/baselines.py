"""Learning-free reference reconstructions.

  - sparse FBP: FBP of the measured views only
  - linear FBP: FBP after linear angular upsampling to the full grid
  - FISTA-TV: accelerated proximal gradient on
        1/2 ||A x - b||^2 + w * TV(x)
    with isotropic TV, a Chambolle dual prox, function-value momentum
    restarts, optional nonnegativity and an FBP initializer.

The TV weight is picked by a coarse grid search (data/fista_grid.ini)
scored by ROI PSNR against the known phantom.
"""

import logging
import math
from typing import NamedTuple, Optional, Sequence

import numpy as np

from svct.errors import GeometryMismatchError, LipschitzEstimateError
from svct.filtering import fbp
from svct.geometry import backproject, radon_forward
from svct.metrics import psnr_roi
from svct.models import FistaConfig, Geometry, Image, Sinogram
from svct.sinogram_ops import linear_upsample_angular

logger = logging.getLogger(__name__)


class FistaResult(NamedTuple):
    image: Image
    objective: list[float]
    restarts: int
    lipschitz: float


class GridSearchResult(NamedTuple):
    best: FistaResult
    best_weight: float
    scores: dict[float, float]


# -- classical comparators ------------------------------------------------


def sparse_fbp_baseline(sparse: Sinogram, geom: Geometry) -> Image:
    """FBP of the measured views on their own angle grid."""
    return fbp(sparse, geom.with_angles(sparse.angles))


def linear_fbp_baseline(sparse: Sinogram, geom: Geometry) -> Image:
    """FBP after linear angular upsampling onto geom's uniform grid."""
    upsampled = linear_upsample_angular(sparse, geom.num_angles)
    return fbp(upsampled, geom.with_angles(upsampled.angles))


# -- total variation ---------------------------------------------------------


def _gradient(x: np.ndarray) -> np.ndarray:
    """Forward differences with Neumann boundary, stacked (2, S, S)."""
    grad = np.zeros((2,) + x.shape)
    grad[0, :-1, :] = x[1:, :] - x[:-1, :]
    grad[1, :, :-1] = x[:, 1:] - x[:, :-1]
    return grad


def _divergence(p: np.ndarray) -> np.ndarray:
    """Negative adjoint of _gradient."""
    rows, cols = p[0], p[1]
    div = np.zeros(rows.shape)
    div[0, :] = rows[0, :]
    div[1:-1, :] = rows[1:-1, :] - rows[:-2, :]
    div[-1, :] = -rows[-2, :]
    div[:, 0] += cols[:, 0]
    div[:, 1:-1] += cols[:, 1:-1] - cols[:, :-2]
    div[:, -1] += -cols[:, -2]
    return div


def total_variation(image) -> float:
    """Isotropic TV: sum of forward-difference gradient magnitudes."""
    pixels = image.pixels if isinstance(image, Image) else np.asarray(image, dtype=np.float64)
    grad = _gradient(pixels)
    return float(np.sqrt(grad[0] ** 2 + grad[1] ** 2).sum())


def tv_prox(image, weight: float, iterations: int = 20) -> np.ndarray:
    """argmin_u 1/2 ||u - image||^2 + weight * TV(u), by Chambolle's projection."""
    pixels = image.pixels if isinstance(image, Image) else np.asarray(image, dtype=np.float64)
    if weight <= 0:
        return pixels.copy()
    tau = 0.125
    dual = np.zeros((2,) + pixels.shape)
    for _ in range(iterations):
        step = _gradient(_divergence(dual) - pixels / weight)
        norm = np.sqrt(step[0] ** 2 + step[1] ** 2)
        dual = (dual + tau * step) / (1.0 + tau * norm)
    return pixels - weight * _divergence(dual)


# -- FISTA ------------------------------------------------------------------


def _normal_operator(x: np.ndarray, geom: Geometry) -> np.ndarray:
    sino = radon_forward(Image(pixels=x), geom)
    return backproject(sino, geom).pixels


def estimate_lipschitz(geom: Geometry, iterations: int = 30, seed: int = 0) -> float:
    """Largest eigenvalue of A^T A by power iteration, padded by 1%."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(geom.image_size, geom.image_size))
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(iterations):
        w = _normal_operator(v, geom)
        estimate = float(np.linalg.norm(w))
        if not np.isfinite(estimate) or estimate <= 0.0:
            raise LipschitzEstimateError(estimate)
        v = w / estimate
    return 1.01 * estimate


def _objective(x: np.ndarray, b: np.ndarray, geom: Geometry, tv_weight: float) -> float:
    residual = radon_forward(Image(pixels=x), geom).data - b
    return 0.5 * float(np.sum(residual**2)) + tv_weight * total_variation(x)


def fista_tv(sino: Sinogram, geom: Geometry, cfg: Optional[FistaConfig] = None) -> FistaResult:
    """Minimize 1/2 ||A x - b||^2 + w TV(x), starting from FBP of the data."""
    cfg = cfg or FistaConfig()
    if sino.data.shape != (geom.num_detectors, geom.num_angles):
        raise GeometryMismatchError(
            f"sinogram is {sino.data.shape}, geometry expects {(geom.num_detectors, geom.num_angles)}"
        )
    b = sino.data
    if cfg.step_size == "auto":
        lipschitz = estimate_lipschitz(geom, cfg.power_iterations, cfg.seed)
    else:
        lipschitz = 1.0 / float(cfg.step_size)
    step = 1.0 / lipschitz

    x = fbp(sino, geom).pixels
    if cfg.nonnegativity:
        x = np.maximum(x, 0.0)
    y, t = x.copy(), 1.0
    objective = [_objective(x, b, geom, cfg.tv_weight)]
    restarts = 0

    for it in range(cfg.outer_iterations):
        residual = radon_forward(Image(pixels=y), geom).data - b
        gradient = backproject(Sinogram(data=residual, angles=geom.angles), geom).pixels
        x_next = tv_prox(y - step * gradient, step * cfg.tv_weight, cfg.tv_prox_iterations)
        if cfg.nonnegativity:
            x_next = np.maximum(x_next, 0.0)
        value = _objective(x_next, b, geom, cfg.tv_weight)

        if cfg.restart and value > objective[-1]:
            # Momentum overshoot: restart from the last iterate.
            restarts += 1
            logger.debug("fista restart at iteration %d (%.6g > %.6g)", it, value, objective[-1])
            y, t = x.copy(), 1.0
            objective.append(objective[-1])
            continue

        t_next = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        y = x_next + ((t - 1.0) / t_next) * (x_next - x)
        x, t = x_next, t_next
        objective.append(value)
        logger.debug("fista iteration %d objective %.6g", it, value)

    return FistaResult(Image(pixels=x), objective, restarts, lipschitz)


def fista_grid_search(
    sino: Sinogram,
    geom: Geometry,
    target: Image,
    tv_weights: Sequence[float],
    cfg: Optional[FistaConfig] = None,
) -> GridSearchResult:
    """Run fista_tv for every TV weight; keep the best ROI PSNR."""
    cfg = cfg or FistaConfig()
    if not tv_weights:
        raise ValueError("grid search needs at least one tv_weight")
    scores: dict[float, float] = {}
    best, best_weight = None, None
    for weight in tv_weights:
        result = fista_tv(sino, geom, cfg.model_copy(update={"tv_weight": float(weight)}))
        score = psnr_roi(result.image, target)
        scores[float(weight)] = score
        logger.info("fista tv_weight=%g psnr_roi=%.2f dB", weight, score)
        if best is None or score > scores[best_weight]:
            best, best_weight = result, float(weight)
    return GridSearchResult(best, best_weight, scores)
