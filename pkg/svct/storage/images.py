"""Grayscale image files: binary PGM (P5) and, optionally, PNG.

PGM samples are 8-bit for maxval < 256 and big-endian 16-bit otherwise;
images are written with maxval 65535. Pixel values map linearly from
[0, 1] (clipped) to [0, maxval]. Header comments (# ... to end of line)
are accepted on read.
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np

from svct.errors import ImageFileError

logger = logging.getLogger(__name__)

PGM_MAXVAL = 65535


def encode_pgm(pixels: np.ndarray, maxval: int = PGM_MAXVAL) -> bytes:
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2:
        raise ValueError(f"PGM needs a 2-D grid, got shape {pixels.shape}")
    if not 1 <= maxval <= 65535:
        raise ValueError(f"maxval must be in [1, 65535], got {maxval}")
    height, width = pixels.shape
    samples = np.rint(np.clip(pixels, 0.0, 1.0) * maxval)
    dtype = ">u1" if maxval < 256 else ">u2"
    header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
    return header + samples.astype(dtype).tobytes()


def _header_tokens(buffer: bytes, path: str, count: int) -> tuple[list[int], int]:
    """Read `count` integer header fields after the magic; returns them and the data offset."""
    tokens: list[int] = []
    offset = 2
    while len(tokens) < count:
        if offset >= len(buffer):
            raise ImageFileError(path, offset, "truncated PGM header")
        char = buffer[offset:offset + 1]
        if char.isspace():
            offset += 1
        elif char == b"#":
            end = buffer.find(b"\n", offset)
            offset = len(buffer) if end < 0 else end + 1
        elif char.isdigit():
            start = offset
            while offset < len(buffer) and buffer[offset:offset + 1].isdigit():
                offset += 1
            tokens.append(int(buffer[start:offset]))
        else:
            raise ImageFileError(path, offset, f"unexpected byte {char!r} in PGM header")
    if offset >= len(buffer) or not buffer[offset:offset + 1].isspace():
        raise ImageFileError(path, offset, "PGM header must end with one whitespace byte")
    return tokens, offset + 1


def decode_pgm(buffer: bytes, path: str = "<stream>") -> np.ndarray:
    """Pixels scaled to [0, 1] as float64."""
    if buffer[:2] != b"P5":
        raise ImageFileError(path, 0, f"not a binary PGM (magic {buffer[:2]!r})")
    (width, height, maxval), offset = _header_tokens(buffer, path, 3)
    if width < 1 or height < 1:
        raise ImageFileError(path, 2, f"invalid dimensions {width}x{height}")
    if not 1 <= maxval <= 65535:
        raise ImageFileError(path, 2, f"invalid maxval {maxval}")
    dtype = ">u1" if maxval < 256 else ">u2"
    expected = width * height * np.dtype(dtype).itemsize
    available = len(buffer) - offset
    if available < expected:
        raise ImageFileError(path, offset, f"truncated pixel data: need {expected} bytes, {available} present")
    samples = np.frombuffer(buffer, dtype=dtype, count=width * height, offset=offset)
    return samples.reshape(height, width).astype(np.float64) / maxval


def write_image(path: Union[str, Path], pixels: np.ndarray) -> None:
    """PGM for .pgm, 16-bit PNG (via scikit-image) for .png."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".png":
        import skimage.io

        samples = np.rint(np.clip(pixels, 0.0, 1.0) * PGM_MAXVAL).astype(np.uint16)
        skimage.io.imsave(str(path), samples, check_contrast=False)
    else:
        path.write_bytes(encode_pgm(pixels))
    logger.debug("wrote %s", path)


def read_image(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ImageFileError(str(path), 0, "file not found")
    buffer = path.read_bytes()
    if buffer[:8] == b"\x89PNG\r\n\x1a\n":
        import skimage.io

        samples = skimage.io.imread(str(path))
        if samples.ndim != 2:
            raise ImageFileError(str(path), 0, f"expected a grayscale PNG, got shape {samples.shape}")
        return samples.astype(np.float64) / np.iinfo(samples.dtype).max
    return decode_pgm(buffer, str(path))
