"""Training subcommands: train-sin and train-prn.

Both synthesize the phantom set from [pipeline] (the last held_out
phantoms are kept for evaluation and never trained on), train one stage
and write its generator checkpoint plus the loss trace CSV.
"""

import argparse
import logging
from pathlib import Path

from svct.commands.common import config_from, show_progress
from svct.config import ConfigBundle
from svct.filtering import ramp_kernel
from svct.models import Image, TrainConfig
from svct.phantoms import phantom_set
from svct.pipeline import build_discriminators, build_prn_network, build_sin_network, load_network
from svct.storage.tensorfile import load_checkpoint, save_checkpoint
from svct.training.dataset import PairDataset
from svct.training.trainer import train_gan_incremental, write_loss_trace
from svct.training.two_step import build_prn_pairs, build_sin_pairs

logger = logging.getLogger(__name__)


def training_phantoms(bundle: ConfigBundle, seed: int) -> list[Image]:
    p = bundle.pipeline
    phantoms = phantom_set(p.image_size, p.num_phantoms, p.ellipse_count, seed)
    return phantoms[: p.num_phantoms - p.held_out]


def _stage_config(config: TrainConfig, args: argparse.Namespace) -> TrainConfig:
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.iterations is not None:
        updates["iterations"] = args.iterations
    return config.model_copy(update=updates)


def run_train_sin(args: argparse.Namespace) -> int:
    bundle = config_from(args)
    config = _stage_config(bundle.train_sin, args)
    phantoms = training_phantoms(bundle, config.seed)
    inputs, targets = build_sin_pairs(phantoms, bundle.pipeline, config, seed=config.seed)
    generator = build_sin_network(bundle.network, seed=config.seed, dtype=config.dtype)
    discs = build_discriminators(bundle.network, local=config.use_local, seed=config.seed + 1, dtype=config.dtype)
    result = train_gan_incremental(
        generator, discs, PairDataset(inputs, targets, config.batch_size, config.seed), config,
        kind="sin", kernel=ramp_kernel(bundle.pipeline.image_size - 1), progress=show_progress(args),
    )
    save_checkpoint(args.out, generator.state_dict())
    if args.trace:
        write_loss_trace(result.trace, args.trace)
    logger.info("saved SIN checkpoint to %s", args.out)
    return 0


def run_train_prn(args: argparse.Namespace) -> int:
    bundle = config_from(args)
    config = _stage_config(bundle.train_prn, args)
    sin_config = bundle.train_sin
    sin_net = load_network(build_sin_network(bundle.network, dtype=sin_config.dtype), load_checkpoint(args.sin))
    phantoms = training_phantoms(bundle, sin_config.seed if args.seed is None else args.seed)
    config = config.model_copy(update={"use_two_ends": sin_config.use_two_ends})
    inputs, targets = build_prn_pairs(phantoms, sin_net, bundle.pipeline, config, seed=config.seed)
    generator = build_prn_network(bundle.network, config.prn_input, seed=config.seed, dtype=config.dtype)
    discs = build_discriminators(bundle.network, local=False, seed=config.seed + 1, dtype=config.dtype)
    result = train_gan_incremental(
        generator, discs, PairDataset(inputs, targets, config.batch_size, config.seed), config,
        kind="prn", progress=show_progress(args),
    )
    save_checkpoint(args.out, generator.state_dict())
    if args.trace:
        write_loss_trace(result.trace, args.trace)
    logger.info("saved PRN checkpoint to %s", args.out)
    return 0


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    for name, handler, help_text in (
        ("train-sin", run_train_sin, "train the sinogram inpainting network"),
        ("train-prn", run_train_prn, "train the refinement network on a frozen SIN"),
    ):
        p = subparsers.add_parser(name, parents=[parent], help=help_text)
        p.add_argument("--out", type=Path, required=True, help="generator checkpoint to write")
        p.add_argument("--trace", type=Path, default=None, help="loss trace CSV")
        p.add_argument("--iterations", type=int, default=None, help="generator iterations")
        if name == "train-prn":
            p.add_argument("--sin", required=True, help="trained SIN checkpoint")
        p.set_defaults(handler=handler)
