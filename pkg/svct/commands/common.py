"""Shared plumbing for the subcommands: common options, config, stdin/stdout files.

A missing path (or "-") means stdin for inputs and stdout for outputs, so
the operator commands chain with pipes. Images are tensor files unless
the path ends in .pgm or .png; sinograms are always bundles.
"""

import argparse
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from svct.config import ConfigBundle, load_config
from svct.errors import GeometryMismatchError, TensorFileError
from svct.models import Image, Sinogram
from svct.storage.images import read_image, write_image
from svct.storage.tensorfile import decode_sinogram, decode_tensor, encode_sinogram, encode_tensor

IMAGE_SUFFIXES = {".pgm", ".png"}


def common_options() -> argparse.ArgumentParser:
    """Options every subcommand accepts."""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", type=Path, default=None, help="INI file (default: data/desk.ini)")
    parent.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="override one config value; repeatable",
    )
    parent.add_argument("--seed", type=int, default=None, help="seed for every random draw of the command")
    parent.add_argument("--no-progress", action="store_true", help="hide progress bars")
    return parent


def config_from(args: argparse.Namespace) -> ConfigBundle:
    return load_config(args.config, args.overrides)


def _is_stream(path: Optional[str]) -> bool:
    return path in (None, "-")


def read_bytes(path: Optional[str]) -> tuple[bytes, str]:
    if _is_stream(path):
        return sys.stdin.buffer.read(), "<stdin>"
    if not Path(path).exists():
        raise TensorFileError(str(path), 0, "file not found")
    return Path(path).read_bytes(), str(path)


def write_bytes(path: Optional[str], data: bytes) -> None:
    if _is_stream(path):
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(data)


def read_image_arg(path: Optional[str]) -> Image:
    """Image from a tensor file (or stdin) or a PGM/PNG file."""
    if not _is_stream(path) and Path(path).suffix.lower() in IMAGE_SUFFIXES:
        return Image(pixels=read_image(path))
    buffer, name = read_bytes(path)
    array, end = decode_tensor(buffer, 0, name)
    if end != len(buffer):
        raise TensorFileError(name, end, f"{len(buffer) - end} trailing bytes after tensor")
    array = np.squeeze(array.astype(np.float64))
    if array.ndim != 2:
        raise GeometryMismatchError(f"{name}: expected a 2-D image, got shape {array.shape}")
    return Image(pixels=array)


def write_image_arg(path: Optional[str], pixels: np.ndarray) -> None:
    if not _is_stream(path) and Path(path).suffix.lower() in IMAGE_SUFFIXES:
        write_image(path, pixels)
    else:
        write_bytes(path, encode_tensor(pixels))


def read_sinogram_arg(path: Optional[str]) -> Sinogram:
    buffer, name = read_bytes(path)
    return decode_sinogram(buffer, name)


def write_sinogram_arg(path: Optional[str], sino: Sinogram) -> None:
    write_bytes(path, encode_sinogram(sino))


def add_io(parser: argparse.ArgumentParser, output: bool = True) -> None:
    parser.add_argument("-i", "--input", default=None, help="input file (default: stdin)")
    if output:
        parser.add_argument("-o", "--output", default=None, help="output file (default: stdout)")


def show_progress(args: argparse.Namespace) -> bool:
    return not args.no_progress and sys.stderr.isatty()
