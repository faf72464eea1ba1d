"""Operator subcommands: phantom, project, sparse, fbp, upsample, te-extend.

Each reads one file (or stdin) and writes one file (or stdout), e.g.

    svct phantom --kind shepp_logan --size 64 | svct project --angles 45 > sino.ctc
"""

import argparse
import logging

from svct.commands.common import (
    add_io,
    read_image_arg,
    read_sinogram_arg,
    write_image_arg,
    write_sinogram_arg,
)
from svct.filtering import fbp
from svct.geometry import radon_forward
from svct.models import Geometry, PhantomSpec
from svct.phantoms import make_phantom
from svct.sinogram_ops import linear_upsample_angular, sparse_sample, two_ends_crop, two_ends_extend

logger = logging.getLogger(__name__)


def run_phantom(args: argparse.Namespace) -> int:
    spec = PhantomSpec(kind=args.kind, size=args.size, ellipse_count=args.ellipses, seed=args.seed or 0)
    write_image_arg(args.output, make_phantom(spec).pixels)
    return 0


def run_project(args: argparse.Namespace) -> int:
    image = read_image_arg(args.input)
    geom = Geometry.parallel(image.size, args.angles)
    sino = radon_forward(image, geom)
    logger.info("projected %dx%d image onto %d angles", image.size, image.size, args.angles)
    write_sinogram_arg(args.output, sino)
    return 0


def run_sparse(args: argparse.Namespace) -> int:
    write_sinogram_arg(args.output, sparse_sample(read_sinogram_arg(args.input), args.every))
    return 0


def run_fbp(args: argparse.Namespace) -> int:
    sino = read_sinogram_arg(args.input)
    geom = Geometry(num_detectors=sino.num_detectors, num_angles=sino.num_angles, angles=sino.angles)
    write_image_arg(args.output, fbp(sino, geom, method=args.method).pixels)
    return 0


def run_upsample(args: argparse.Namespace) -> int:
    write_sinogram_arg(args.output, linear_upsample_angular(read_sinogram_arg(args.input), args.angles))
    return 0


def run_te_extend(args: argparse.Namespace) -> int:
    sino = read_sinogram_arg(args.input)
    result = two_ends_crop(sino, args.pad) if args.crop else two_ends_extend(sino, args.pad)
    write_sinogram_arg(args.output, result)
    return 0


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    p = subparsers.add_parser("phantom", parents=[parent], help="synthesize a phantom image")
    p.add_argument("--kind", choices=["shepp_logan", "random_ellipses"], default="shepp_logan")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--ellipses", type=int, default=8, help="ellipse count of random phantoms")
    p.add_argument("-o", "--output", default=None, help="output file (default: stdout)")
    p.set_defaults(handler=run_phantom)

    p = subparsers.add_parser("project", parents=[parent], help="parallel-beam forward projection")
    add_io(p)
    p.add_argument("--angles", type=int, required=True, help="uniform views over [0, pi)")
    p.set_defaults(handler=run_project)

    p = subparsers.add_parser("sparse", parents=[parent], help="keep every k-th view")
    add_io(p)
    p.add_argument("--every", type=int, default=8)
    p.set_defaults(handler=run_sparse)

    p = subparsers.add_parser("fbp", parents=[parent], help="filtered backprojection")
    add_io(p)
    p.add_argument("--method", choices=["spatial", "frequency"], default="spatial")
    p.set_defaults(handler=run_fbp)

    p = subparsers.add_parser("upsample", parents=[parent], help="linear angular upsampling")
    add_io(p)
    p.add_argument("--angles", type=int, required=True, help="target uniform view count")
    p.set_defaults(handler=run_upsample)

    p = subparsers.add_parser("te-extend", parents=[parent], help="two-ends extension (or --crop)")
    add_io(p)
    p.add_argument("--pad", type=int, default=6)
    p.add_argument("--crop", action="store_true", help="remove the padding instead")
    p.set_defaults(handler=run_te_extend)
