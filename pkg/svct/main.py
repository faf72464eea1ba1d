"""svct: sparse-view CT reconstruction with sinogram inpainting and refinement.

A two-step pipeline for parallel-beam CT with few views. A sinogram
inpainting network (SIN) fills in the missing views of a sparse
sinogram; a refinement network (PRN) then removes the residual streaks
from the FBP reconstruction of the inpainted sinogram. The classic
baselines (sparse FBP, linearly interpolated FBP and FISTA-TV) and the
ROI metrics used to compare them ship alongside.

Run with:
    python3 -m svct --help
    python3 -m svct phantom | python3 -m svct project --angles 180 | python3 -m svct fbp -o out.pgm
"""

import argparse
import logging
import sys
from typing import Optional, Sequence

from pydantic import ValidationError

from svct.commands import COMMAND_MODULES
from svct.commands.common import common_options
from svct.errors import SVCTError

logger = logging.getLogger("svct")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svct", description="Sparse-view CT two-step reconstruction")
    parser.add_argument(
        "--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="stderr log verbosity",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    parent = common_options()
    for module in COMMAND_MODULES:
        module.register(subparsers, parent)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, dispatch and map failures to exit codes (2 usage/data, 1 internal)."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except (SVCTError, ValidationError) as exc:
        message = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"svct {args.command}: {message}", file=sys.stderr)
        return 2
    except Exception:
        logger.exception("unexpected failure in '%s'", args.command)
        return 1


if __name__ == "__main__":
    sys.exit(main())
