"""Two-step training: sinogram inpainting first, then refinement on its output.

Stage 1 trains SIN on (pad(linear_upsample(sparse)), pad(full)) sinogram
pairs. Stage 2 freezes SIN, builds refinement inputs from its output and
trains PRN against the phantoms.

Per-sample work (augmentation, projection, FBP cascades) may run on a
thread pool; every sample's random draws come from a seed drawn up front,
so results do not depend on the worker count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from svct.filtering import ramp_kernel
from svct.geometry import radon_forward
from svct.models import Image, NetworkConfig, PipelineConfig, Sinogram, TrainConfig
from svct.nn_kit.network import Network
from svct.pipeline import (
    build_discriminators,
    build_prn_network,
    build_sin_network,
    pad_angles,
    prn_input,
    sin_inpaint,
)
from svct.sinogram_ops import linear_upsample_angular, sparse_sample
from svct.training.augment import random_affine
from svct.training.dataset import PairDataset
from svct.training.trainer import TrainResult, train_gan_incremental

logger = logging.getLogger(__name__)


class TwoStepResult(NamedTuple):
    sin: TrainResult
    prn: TrainResult

    @property
    def sin_params(self) -> dict[str, np.ndarray]:
        return self.sin.generator.state_dict()

    @property
    def prn_params(self) -> dict[str, np.ndarray]:
        return self.prn.generator.state_dict()


def _parallel_map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def augmented_phantoms(phantoms: Sequence[Image], config: TrainConfig, seed: int) -> list[Image]:
    """Each phantom followed by config.augment_copies random affine copies."""
    seeds = np.random.default_rng(seed).integers(0, 2**63 - 1, size=(len(phantoms), config.augment_copies))

    def expand(index: int) -> list[Image]:
        base = phantoms[index]
        copies = [random_affine(base, int(s), config.augmentation) for s in seeds[index]]
        return [base] + copies

    expanded = _parallel_map(expand, range(len(phantoms)), config.num_workers)
    return [image for group in expanded for image in group]


def simulate(phantom: Image, pipeline: PipelineConfig) -> tuple[Sinogram, Sinogram]:
    """(full, sparse) sinograms of one phantom."""
    full = radon_forward(phantom, pipeline.geometry())
    return full, sparse_sample(full, pipeline.sparse_every)


def build_sin_pairs(
    phantoms: Sequence[Image], pipeline: PipelineConfig, config: TrainConfig, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Normalized (N, 1, S, P') inputs and targets of the inpainting stage."""
    images = augmented_phantoms(phantoms, config, seed)

    def pair(image: Image) -> tuple[np.ndarray, np.ndarray]:
        full, sparse = simulate(image, pipeline)
        upsampled = linear_upsample_angular(sparse, pipeline.full_views)
        x = pad_angles(upsampled, pipeline.te_pad, config.use_two_ends).data
        y = pad_angles(full, pipeline.te_pad, config.use_two_ends).data
        scale = 1.0 / full.num_detectors
        return x * scale, y * scale

    pairs = _parallel_map(pair, images, config.num_workers)
    inputs = np.stack([p[0] for p in pairs])[:, None].astype(config.dtype)
    targets = np.stack([p[1] for p in pairs])[:, None].astype(config.dtype)
    return inputs, targets


def build_prn_pairs(
    phantoms: Sequence[Image],
    sin_net: Optional[Network],
    pipeline: PipelineConfig,
    config: TrainConfig,
    seed: int = 0,
    oracle: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """(N, C, S, S) refinement inputs and (N, 1, S, S) phantom targets.

    With oracle=True the true full sinogram stands in for the SIN output.
    SIN inference runs serially; only the FBPs are spread over workers.
    """
    images = augmented_phantoms(phantoms, config, seed)
    geom = pipeline.geometry()
    simulated = _parallel_map(lambda image: simulate(image, pipeline), images, config.num_workers)
    inpainted = [
        full if oracle else sin_inpaint(sparse, sin_net, pipeline, config.use_two_ends)
        for full, sparse in simulated
    ]

    def stack(index: int) -> np.ndarray:
        return prn_input(simulated[index][1], inpainted[index], geom, config.prn_input)

    inputs = np.stack(_parallel_map(stack, range(len(images)), config.num_workers)).astype(config.dtype)
    targets = np.stack([image.pixels for image in images])[:, None].astype(config.dtype)
    return inputs, targets


def train_two_step(
    phantoms: Sequence[Image],
    pipeline: PipelineConfig,
    network: NetworkConfig,
    sin_config: TrainConfig,
    prn_config: TrainConfig,
    progress: bool = True,
) -> TwoStepResult:
    """Train SIN, freeze it, then train PRN on cascades built from its output."""
    logger.info("stage 1: sinogram inpainting on %d phantoms", len(phantoms))
    sin_inputs, sin_targets = build_sin_pairs(phantoms, pipeline, sin_config, seed=sin_config.seed)
    sin_net = build_sin_network(network, seed=sin_config.seed, dtype=sin_config.dtype)
    sin_discs = build_discriminators(
        network, in_channels=1, local=sin_config.use_local, seed=sin_config.seed + 1, dtype=sin_config.dtype
    )
    sin_result = train_gan_incremental(
        sin_net, sin_discs,
        PairDataset(sin_inputs, sin_targets, sin_config.batch_size, sin_config.seed),
        sin_config, kind="sin", kernel=ramp_kernel(pipeline.image_size - 1), progress=progress,
    )

    logger.info("stage 2: refinement on %s inputs", prn_config.prn_input)
    prn_inputs, prn_targets = build_prn_pairs(phantoms, sin_net, pipeline, prn_config, seed=prn_config.seed)
    prn_net = build_prn_network(network, prn_config.prn_input, seed=prn_config.seed, dtype=prn_config.dtype)
    prn_discs = build_discriminators(
        network, in_channels=1, local=False, seed=prn_config.seed + 1, dtype=prn_config.dtype
    )
    prn_result = train_gan_incremental(
        prn_net, prn_discs,
        PairDataset(prn_inputs, prn_targets, prn_config.batch_size, prn_config.seed),
        prn_config, kind="prn", progress=progress,
    )
    return TwoStepResult(sin_result, prn_result)
