"""Random affine augmentation of training phantoms.

Transforms act in the reconstruction domain only; sinograms are always
simulated from the warped image. Coordinates are (row, col) about the
image centre c = ((S-1)/2, (S-1)/2); an input pixel p maps to

    p_out = R(rotation) . Sh(shear) . scale . (p - c + t) + c

with rotation counter-clockwise in the (x = col, y = row) frame and
shear x' = x + tan(shear) * y. Resampling is bilinear with zero fill.
"""

import math
from typing import Optional, Union

import numpy as np
import scipy.ndimage

from svct.models import AffineDraw, AffineParams, Image


def affine_matrix(draw: AffineDraw) -> np.ndarray:
    """2x2 forward matrix in (row, col) coordinates."""
    theta = math.radians(draw.rotation_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    rotation = np.array([[cos_t, sin_t], [-sin_t, cos_t]])
    shear = np.array([[1.0, 0.0], [math.tan(math.radians(draw.shear_deg)), 1.0]])
    return rotation @ shear @ (draw.scale * np.eye(2))


def apply_affine(image: Union[Image, np.ndarray], draw: AffineDraw) -> Image:
    """Warp an image by one concrete affine draw."""
    pixels = image.pixels if isinstance(image, Image) else np.asarray(image, dtype=np.float64)
    size = pixels.shape[0]
    center = np.full(2, (size - 1) / 2.0)
    shift = np.array([draw.translate_rows, draw.translate_cols]) * size
    inverse = np.linalg.inv(affine_matrix(draw))
    # affine_transform maps output coordinates to input coordinates.
    offset = center - shift - inverse @ center
    warped = scipy.ndimage.affine_transform(
        pixels, inverse, offset=offset, order=1, mode="constant", cval=0.0
    )
    return Image(pixels=warped)


def draw_affine(params: AffineParams, rng: np.random.Generator) -> AffineDraw:
    """Uniform draw in the order rotation, row shift, col shift, scale, shear."""
    return AffineDraw(
        rotation_deg=float(rng.uniform(-params.rotation_deg, params.rotation_deg)),
        translate_rows=float(rng.uniform(-params.translation, params.translation)),
        translate_cols=float(rng.uniform(-params.translation, params.translation)),
        scale=float(rng.uniform(params.scale_min, params.scale_max)),
        shear_deg=float(rng.uniform(-params.shear_deg, params.shear_deg)),
    )


def random_affine(
    image: Union[Image, np.ndarray],
    rng: Union[np.random.Generator, int],
    params: Optional[AffineParams] = None,
) -> Image:
    params = params or AffineParams()
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return apply_affine(image, draw_affine(params, rng))
