"""Evaluation subcommands: eval, gradcheck and compare."""

import argparse
import logging
import sys

from svct.commands.common import config_from, read_image_arg
from svct.commands.training import training_phantoms
from svct.errors import ConfigError
from svct.gradcheck import run_gradient_suite
from svct.metrics import evaluate_pair, write_report_csv, write_summary_csv
from svct.phantoms import phantom_set
from svct.pipeline import build_prn_network, build_sin_network, compare_methods, load_network
from svct.storage.tensorfile import load_checkpoint

logger = logging.getLogger(__name__)


def run_eval(args: argparse.Namespace) -> int:
    pred = read_image_arg(args.pred)
    target = read_image_arg(args.target)
    report = evaluate_pair(args.case_id, args.method, pred, target, data_range=args.data_range)
    write_report_csv([report], handle=sys.stdout)
    return 0


def run_gradcheck(args: argparse.Namespace) -> int:
    results = run_gradient_suite(seed=args.seed or 0)
    failed = [r for r in results if not r.passed]
    for result in results:
        if args.verbose or not result.passed:
            print(f"{'ok  ' if result.passed else 'FAIL'} {result.name:<36} {result.rel_error:.2e}")
    print(f"{len(results) - len(failed)}/{len(results)} gradient checks passed")
    return 0 if not failed else 1


def run_compare(args: argparse.Namespace) -> int:
    if args.prn and not args.sin:
        raise ConfigError("--prn needs the --sin checkpoint it was trained on")
    bundle = config_from(args)
    pipeline = bundle.pipeline
    # held-out phantoms: the tail of the same seeded set the trainers draw from
    seed = bundle.train_sin.seed if args.seed is None else args.seed
    everything = phantom_set(pipeline.image_size, pipeline.num_phantoms, pipeline.ellipse_count, seed)
    held_out = everything[len(training_phantoms(bundle, seed)):]
    count = args.count or len(held_out)
    phantoms = held_out[:count]

    sin_net = prn_net = None
    if args.sin:
        sin_net = load_network(
            build_sin_network(bundle.network, dtype=bundle.train_sin.dtype), load_checkpoint(args.sin)
        )
    if args.prn:
        prn_net = load_network(
            build_prn_network(bundle.network, bundle.train_prn.prn_input, dtype=bundle.train_prn.dtype),
            load_checkpoint(args.prn),
        )

    result = compare_methods(
        phantoms, pipeline.geometry(), pipeline, bundle.fista, bundle.fista_grid.tv_weights,
        sin_net=sin_net, prn_net=prn_net, prn_mode=bundle.train_prn.prn_input,
        two_ends=bundle.train_sin.use_two_ends,
    )
    logger.info("FISTA-TV weight chosen by grid search: %g", result.fista_weight)
    if args.out:
        write_report_csv(result.reports, path=args.out)
    write_summary_csv(result.summary, sys.stdout)
    return 0


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    p = subparsers.add_parser("eval", parents=[parent], help="ROI PSNR/SSIM of one image pair")
    p.add_argument("--pred", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--case-id", default="case000")
    p.add_argument("--method", default="input")
    p.add_argument("--data-range", type=float, default=1.0)
    p.set_defaults(handler=run_eval)

    p = subparsers.add_parser("gradcheck", parents=[parent], help="finite-difference gradient checks")
    p.add_argument("--all", action="store_true", help="run every layer, network and loss check (default)")
    p.add_argument("-v", "--verbose", action="store_true", help="print passing checks too")
    p.set_defaults(handler=run_gradcheck)

    p = subparsers.add_parser("compare", parents=[parent], help="baselines vs. SIN alone or the learned pipeline")
    p.add_argument("--count", type=int, default=None, help="held-out phantoms to use")
    p.add_argument("--sin", default=None, help="SIN checkpoint")
    p.add_argument("--prn", default=None, help="PRN checkpoint")
    p.add_argument("--out", default=None, help="per-case CSV")
    p.set_defaults(handler=run_compare)
