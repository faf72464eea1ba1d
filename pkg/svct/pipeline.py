"""Two-step reconstruction orchestrator.

Runs a sparse-view sinogram through every stage in order:
  1. Linear angular upsampling onto the full grid
  2. Two-ends extension (or edge padding when disabled)
  3. Sinogram inpainting network (SIN)
  4. Crop back to the full [0, pi) grid
  5. Cascade of four FBPs (sparse, 1/4, 1/2 and full inpainted views)
  6. Refinement network (PRN) -> final image

Sinograms enter the SIN divided by the detector count and leave it
rescaled. Every intermediate can be written to a directory as a tensor
file for inspection.
"""

import logging
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from svct.baselines import fista_grid_search, fista_tv, linear_fbp_baseline, sparse_fbp_baseline
from svct.errors import CheckpointMismatchError, GeometryMismatchError
from svct.filtering import fbp
from svct.geometry import radon_forward
from svct.metrics import aggregate_reports, evaluate_pair
from svct.models import (
    FistaConfig,
    Geometry,
    Image,
    MetricReport,
    MetricSummary,
    NetworkConfig,
    PipelineConfig,
    Sinogram,
)
from svct.nn_kit.builders import build_patch_discriminator, build_unet
from svct.nn_kit.network import Network
from svct.sinogram_ops import (
    build_cascade,
    linear_upsample_angular,
    sparse_sample,
    two_ends_crop,
    two_ends_extend,
)
from svct.storage.tensorfile import save_tensor

logger = logging.getLogger(__name__)

PRN_CHANNELS = {"cascade": 4, "single": 1, "sparse": 1}


# -- networks ------------------------------------------------------------


def build_sin_network(network: NetworkConfig, seed: int = 0, dtype: str = "float32") -> Network:
    spec = build_unet(
        network.sin_base_channels, in_channels=1, out_channels=1, role="sin_generator",
        max_channels=network.max_channels, residual_channel=0 if network.residual else None,
    )
    return Network(spec, seed=seed, dtype=dtype)


def build_prn_network(
    network: NetworkConfig, prn_input: str = "cascade", seed: int = 0, dtype: str = "float32"
) -> Network:
    """Refinement U-Net; with a cascade input the residual is the full-view FBP channel."""
    channels = PRN_CHANNELS[prn_input]
    spec = build_unet(
        network.prn_base_channels, in_channels=channels, out_channels=1, role="prn_generator",
        max_channels=network.max_channels, residual_channel=channels - 1 if network.residual else None,
    )
    return Network(spec, seed=seed, dtype=dtype)


def build_discriminators(
    network: NetworkConfig, in_channels: int = 1, local: bool = True, seed: int = 0, dtype: str = "float32"
) -> dict[str, Network]:
    spec = build_patch_discriminator(in_channels, network.disc_base_channels, network.disc_max_channels)
    discs = {"global": Network(spec, seed=seed, dtype=dtype)}
    if local:
        discs["local"] = Network(spec, seed=seed + 1, dtype=dtype)
    return discs


def load_network(net: Network, state: dict[str, np.ndarray]) -> Network:
    """Load a checkpoint, naming the network role on mismatch."""
    try:
        net.load_state_dict(state)
    except CheckpointMismatchError as exc:
        raise CheckpointMismatchError(f"{net.spec.role}: {exc}") from exc
    return net


# -- sinogram stage ------------------------------------------------------------


def pad_angles(sino: Sinogram, pad: int, two_ends: bool = True) -> Sinogram:
    """Widen the angle axis by `pad` views per side: two-ends flipping or edge copies."""
    if two_ends:
        return two_ends_extend(sino, pad)
    if pad == 0:
        return sino
    step = sino.angle_array[1] - sino.angle_array[0] if sino.num_angles > 1 else np.pi
    angles = np.concatenate([
        sino.angle_array[0] - step * np.arange(pad, 0, -1),
        sino.angle_array,
        sino.angle_array[-1] + step * np.arange(1, pad + 1),
    ])
    data = np.pad(sino.data, ((0, 0), (pad, pad)), mode="edge")
    return Sinogram(data=data, angles=tuple(angles), detector_spacing=sino.detector_spacing)


def to_network(data: np.ndarray, num_detectors: int) -> np.ndarray:
    """(S, P) sinogram -> (1, 1, S, P) normalized network input."""
    return (data / num_detectors)[None, None]


def from_network(out: np.ndarray, num_detectors: int) -> np.ndarray:
    return np.asarray(out, dtype=np.float64)[0, 0] * num_detectors


def sin_inpaint(
    sparse: Sinogram,
    sin_net: Optional[Network],
    pipeline: PipelineConfig,
    two_ends: bool = True,
    dumps: Optional[dict[str, np.ndarray]] = None,
) -> Sinogram:
    """Sparse measurement -> inpainted full-grid sinogram (cropped).

    sin_net=None skips the network, leaving the linear interpolation.
    """
    upsampled = linear_upsample_angular(sparse, pipeline.full_views)
    padded = pad_angles(upsampled, pipeline.te_pad, two_ends)
    if sin_net is None:
        inpainted = padded.data
    else:
        out = sin_net.forward(to_network(padded.data, padded.num_detectors), training=False)
        inpainted = from_network(out, padded.num_detectors)
    cropped = two_ends_crop(
        Sinogram(data=inpainted, angles=padded.angles, detector_spacing=padded.detector_spacing),
        pipeline.te_pad,
    )
    if dumps is not None:
        dumps["upsampled"] = upsampled.data
        dumps["extended"] = padded.data
        dumps["inpainted_extended"] = inpainted
        dumps["inpainted"] = cropped.data
    return cropped


def prn_input(sparse: Sinogram, inpainted: Sinogram, geom: Geometry, mode: str = "cascade") -> np.ndarray:
    """(C, S, S) refinement input for the chosen composition."""
    if mode == "cascade":
        return build_cascade(sparse, inpainted, geom).channels
    if mode == "single":
        return fbp(inpainted, geom).pixels[None]
    return sparse_fbp_baseline(sparse, geom).pixels[None]


def run_pipeline(
    sparse: Sinogram,
    sin_net: Optional[Network],
    prn_net: Optional[Network],
    geom: Geometry,
    pipeline: PipelineConfig,
    prn_mode: str = "cascade",
    two_ends: bool = True,
    dump_dir: Optional[Path] = None,
) -> Image:
    """Sparse sinogram -> refined reconstruction on geom's full grid."""
    if sparse.num_detectors != geom.num_detectors:
        raise GeometryMismatchError(
            f"sinogram has {sparse.num_detectors} detectors, geometry expects {geom.num_detectors}"
        )
    if geom.num_angles != pipeline.full_views:
        raise GeometryMismatchError(
            f"geometry has {geom.num_angles} views, pipeline expects {pipeline.full_views}"
        )
    dumps: Optional[dict[str, np.ndarray]] = {} if dump_dir is not None else None
    inpainted = sin_inpaint(sparse, sin_net, pipeline, two_ends, dumps)
    stack = prn_input(sparse, inpainted, geom, prn_mode)
    if prn_net is None:
        image = stack[-1]
    else:
        image = np.asarray(prn_net.forward(stack[None], training=False), dtype=np.float64)[0, 0]
    if dumps is not None:
        dumps["cascade"] = stack
        dumps["refined"] = image[None]
        dump_dir = Path(dump_dir)
        for index, (name, array) in enumerate(dumps.items(), start=1):
            save_tensor(dump_dir / f"{index:02d}_{name}.ctt", array)
        logger.info("wrote %d intermediates to %s", len(dumps), dump_dir)
    return Image(pixels=image)


# -- comparison table ------------------------------------------------------------


def learned_label(base: str, prn_mode: str = "cascade", two_ends: bool = True) -> str:
    """Method name of a learned row; non-default compositions get a suffix."""
    parts = [base]
    if base == "pipeline" and prn_mode != "cascade":
        parts.append(prn_mode)
    if not two_ends:
        parts.append("no_te")
    return "_".join(parts)


class Comparison(NamedTuple):
    reports: list[MetricReport]
    summary: list[MetricSummary]
    fista_weight: float


def compare_methods(
    phantoms: Sequence[Image],
    geom: Geometry,
    pipeline: PipelineConfig,
    fista: FistaConfig,
    tv_weights: Sequence[float],
    sin_net: Optional[Network] = None,
    prn_net: Optional[Network] = None,
    prn_mode: str = "cascade",
    two_ends: bool = True,
) -> Comparison:
    """Sparse FBP, linear FBP, FISTA-TV and the learned rows.

    With a SIN network alone the extra row is FBP of the inpainted
    sinogram (`sin_fbp`); with both networks it is the full pipeline.
    A PRN network without a SIN network is rejected.
    The TV weight is searched on the first phantom and reused for the rest.
    """
    if prn_net is not None and sin_net is None:
        raise CheckpointMismatchError("a prn network needs the sin network it was trained on")
    reports: list[MetricReport] = []
    fista_weight: Optional[float] = None
    for index, phantom in enumerate(phantoms):
        case_id = f"case{index:03d}"
        full = radon_forward(phantom, geom)
        sparse = sparse_sample(full, pipeline.sparse_every)
        sparse_geom = geom.with_angles(sparse.angles)

        candidates = {
            "sparse_fbp": sparse_fbp_baseline(sparse, geom),
            "linear_fbp": linear_fbp_baseline(sparse, geom),
        }
        if fista_weight is None:
            search = fista_grid_search(sparse, sparse_geom, phantom, tv_weights, fista)
            fista_weight = search.best_weight
            candidates["fista_tv"] = search.best.image
        else:
            candidates["fista_tv"] = fista_tv(
                sparse, sparse_geom, fista.model_copy(update={"tv_weight": fista_weight})
            ).image
        if sin_net is not None and prn_net is not None:
            label = learned_label("pipeline", prn_mode, two_ends)
            candidates[label] = run_pipeline(sparse, sin_net, prn_net, geom, pipeline, prn_mode, two_ends)
        elif sin_net is not None:
            label = learned_label("sin_fbp", two_ends=two_ends)
            candidates[label] = run_pipeline(sparse, sin_net, None, geom, pipeline, "single", two_ends)

        for method, image in candidates.items():
            reports.append(evaluate_pair(case_id, method, image, phantom))
    summary = aggregate_reports(reports)
    for row in summary:
        logger.info("%-10s psnr %.2f +- %.2f  ssim %.3f +- %.3f",
                    row.method, row.psnr_mean, row.psnr_std, row.ssim_mean, row.ssim_std)
    return Comparison(reports, summary, float(fista_weight if fista_weight is not None else 0.0))
