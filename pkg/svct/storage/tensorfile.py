"""Binary tensor files, named-record checkpoints and sinogram bundles.

TensorFile ("CTT1"):
    4 bytes  magic b"CTT1"
    u32      rank
    u32[r]   dims
    f32[...] payload, little-endian, row-major; length == prod(dims) * 4

Checkpoint / bundle ("CTC1"):
    4 bytes  magic b"CTC1"
    u32      record count
    per record: u32 name length, UTF-8 name, embedded TensorFile

All integers are little-endian. A sinogram bundle holds the records
"sinogram" (detectors x angles) and "angles" (radians).
"""

import struct
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from svct.errors import TensorFileError
from svct.models import Sinogram

TENSOR_MAGIC = b"CTT1"
BUNDLE_MAGIC = b"CTC1"

Target = Union[str, Path, BinaryIO]


def encode_tensor(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    header = TENSOR_MAGIC + struct.pack(f"<I{array.ndim}I", array.ndim, *array.shape)
    return header + np.ascontiguousarray(array, dtype="<f4").tobytes()


def _read(buffer: bytes, offset: int, count: int, path: str, what: str) -> bytes:
    if offset + count > len(buffer):
        raise TensorFileError(path, offset, f"truncated {what}: need {count} bytes, {len(buffer) - offset} left")
    return buffer[offset:offset + count]


def decode_tensor(buffer: bytes, offset: int = 0, path: str = "<stream>") -> tuple[np.ndarray, int]:
    """Parse one TensorFile starting at `offset`; returns (array, next offset)."""
    magic = _read(buffer, offset, 4, path, "magic")
    if magic != TENSOR_MAGIC:
        raise TensorFileError(path, offset, f"bad magic {magic!r}, expected {TENSOR_MAGIC!r}")
    offset += 4
    (rank,) = struct.unpack("<I", _read(buffer, offset, 4, path, "rank"))
    offset += 4
    if rank > 8:
        raise TensorFileError(path, offset - 4, f"implausible rank {rank}")
    dims = struct.unpack(f"<{rank}I", _read(buffer, offset, 4 * rank, path, "dims"))
    offset += 4 * rank
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    payload = _read(buffer, offset, 4 * count, path, "payload")
    array = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(dims)
    return array, offset + 4 * count


def _write_bytes(target: Target, data: bytes) -> None:
    if isinstance(target, (str, Path)):
        Path(target).parent.mkdir(parents=True, exist_ok=True)
        Path(target).write_bytes(data)
    else:
        target.write(data)


def _read_bytes(source: Target) -> tuple[bytes, str]:
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise TensorFileError(str(path), 0, "file not found")
        return path.read_bytes(), str(path)
    return source.read(), getattr(source, "name", "<stream>")


def save_tensor(target: Target, array: np.ndarray) -> None:
    _write_bytes(target, encode_tensor(array))


def load_tensor(source: Target) -> np.ndarray:
    buffer, path = _read_bytes(source)
    array, end = decode_tensor(buffer, 0, path)
    if end != len(buffer):
        raise TensorFileError(path, end, f"{len(buffer) - end} trailing bytes after tensor")
    return array


# -- named records ---------------------------------------------------------


def encode_records(records: dict[str, np.ndarray]) -> bytes:
    parts = [BUNDLE_MAGIC, struct.pack("<I", len(records))]
    for name, array in records.items():
        encoded = name.encode("utf-8")
        parts += [struct.pack("<I", len(encoded)), encoded, encode_tensor(array)]
    return b"".join(parts)


def decode_records(buffer: bytes, path: str = "<stream>") -> dict[str, np.ndarray]:
    magic = _read(buffer, 0, 4, path, "magic")
    if magic != BUNDLE_MAGIC:
        raise TensorFileError(path, 0, f"bad magic {magic!r}, expected {BUNDLE_MAGIC!r}")
    (count,) = struct.unpack("<I", _read(buffer, 4, 4, path, "record count"))
    offset = 8
    records: dict[str, np.ndarray] = {}
    for _ in range(count):
        (length,) = struct.unpack("<I", _read(buffer, offset, 4, path, "name length"))
        offset += 4
        raw = _read(buffer, offset, length, path, "record name")
        try:
            name = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TensorFileError(path, offset, "record name is not UTF-8") from exc
        if name in records:
            raise TensorFileError(path, offset, f"duplicate record '{name}'")
        offset += length
        records[name], offset = decode_tensor(buffer, offset, path)
    if offset != len(buffer):
        raise TensorFileError(path, offset, f"{len(buffer) - offset} trailing bytes after records")
    return records


def save_checkpoint(target: Target, state: dict[str, np.ndarray]) -> None:
    _write_bytes(target, encode_records(state))


def load_checkpoint(source: Target) -> dict[str, np.ndarray]:
    buffer, path = _read_bytes(source)
    return decode_records(buffer, path)


def save_sinogram(target: Target, sino: Sinogram) -> None:
    """Bundle of the data grid and its float32 angle list."""
    _write_bytes(target, encode_sinogram(sino))


def load_sinogram(source: Target, detector_spacing: float = 1.0) -> Sinogram:
    buffer, path = _read_bytes(source)
    return decode_sinogram(buffer, path, detector_spacing)


def encode_sinogram(sino: Sinogram) -> bytes:
    return encode_records({"sinogram": sino.data, "angles": np.asarray(sino.angles)})


def decode_sinogram(buffer: bytes, path: str = "<stream>", detector_spacing: float = 1.0) -> Sinogram:
    records = decode_records(buffer, path)
    missing = {"sinogram", "angles"} - set(records)
    if missing:
        raise TensorFileError(path, 0, f"sinogram bundle lacks {sorted(missing)}")
    data = records["sinogram"].astype(np.float64)
    angles = records["angles"].astype(np.float64)
    if data.ndim != 2 or angles.shape != (data.shape[1],):
        raise TensorFileError(path, 0, f"sinogram {data.shape} does not match {angles.shape[0]} angles")
    return Sinogram(data=data, angles=tuple(float(a) for a in angles), detector_spacing=detector_spacing)


def is_bundle(buffer: bytes) -> bool:
    return buffer[:4] == BUNDLE_MAGIC
