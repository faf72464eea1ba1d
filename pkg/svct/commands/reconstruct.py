"""Reconstruction subcommands: fista and recon (the trained two-step pipeline)."""

import argparse
import csv
import logging
from pathlib import Path

from svct.baselines import fista_tv
from svct.commands.common import add_io, config_from, read_sinogram_arg, write_image_arg
from svct.errors import GeometryMismatchError
from svct.models import Geometry
from svct.pipeline import build_prn_network, build_sin_network, load_network, run_pipeline
from svct.storage.tensorfile import load_checkpoint

logger = logging.getLogger(__name__)


def run_fista(args: argparse.Namespace) -> int:
    bundle = config_from(args)
    updates = {}
    if args.tv_weight is not None:
        updates["tv_weight"] = args.tv_weight
    if args.iterations is not None:
        updates["outer_iterations"] = args.iterations
    if args.seed is not None:
        updates["seed"] = args.seed
    cfg = bundle.fista.model_copy(update=updates)

    sino = read_sinogram_arg(args.input)
    geom = Geometry(num_detectors=sino.num_detectors, num_angles=sino.num_angles, angles=sino.angles)
    result = fista_tv(sino, geom, cfg)
    logger.info(
        "fista: objective %.4g -> %.4g, %d restarts, L=%.4g",
        result.objective[0], result.objective[-1], result.restarts, result.lipschitz,
    )
    if args.trace:
        Path(args.trace).parent.mkdir(parents=True, exist_ok=True)
        with open(args.trace, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["iteration", "objective"])
            writer.writerows(enumerate(result.objective))
    write_image_arg(args.output, result.image.pixels)
    return 0


def run_recon(args: argparse.Namespace) -> int:
    bundle = config_from(args)
    pipeline, network = bundle.pipeline, bundle.network
    sino = read_sinogram_arg(args.input)
    if sino.num_detectors != pipeline.image_size:
        raise GeometryMismatchError(
            f"sinogram has {sino.num_detectors} detectors but [pipeline] image_size is {pipeline.image_size}"
        )
    sin_config, prn_config = bundle.train_sin, bundle.train_prn
    sin_net = load_network(build_sin_network(network, dtype=sin_config.dtype), load_checkpoint(args.sin))
    prn_net = load_network(
        build_prn_network(network, prn_config.prn_input, dtype=prn_config.dtype), load_checkpoint(args.prn)
    )
    image = run_pipeline(
        sino, sin_net, prn_net, pipeline.geometry(), pipeline,
        prn_mode=prn_config.prn_input, two_ends=sin_config.use_two_ends, dump_dir=args.dump_dir,
    )
    write_image_arg(args.output, image.pixels)
    return 0


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    p = subparsers.add_parser("fista", parents=[parent], help="FISTA-TV iterative reconstruction")
    add_io(p)
    p.add_argument("--tv-weight", type=float, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--trace", default=None, help="CSV of the objective per iteration")
    p.set_defaults(handler=run_fista)

    p = subparsers.add_parser("recon", parents=[parent], help="two-step reconstruction of a sparse sinogram")
    add_io(p)
    p.add_argument("--sin", required=True, help="SIN checkpoint")
    p.add_argument("--prn", required=True, help="PRN checkpoint")
    p.add_argument("--dump-dir", type=Path, default=None, help="write every intermediate here")
    p.set_defaults(handler=run_recon)
