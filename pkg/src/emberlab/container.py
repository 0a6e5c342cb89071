"""TensorContainer: the on-disk tensor format and checkpoint bundles.

Layout (little-endian throughout):

    magic   4 bytes  b"EMBR"
    version u16      currently 1
    dtype   u8       1 = float64 (the only defined tag)
    ndim    u8
    dims    ndim x u32
    payload 8 * prod(dims) bytes, row-major float64
    crc32   u32 of the payload bytes

Bit-exact round-trips are part of the test contract; loads verify length
and checksum. A checkpoint bundle is a directory of one .embr file per
named tensor plus a key=value manifest.
"""

from __future__ import annotations

import re
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import ContainerFormatError

MAGIC = b"EMBR"
VERSION = 1
DTYPE_F64 = 1

_HEADER = struct.Struct("<4sHBB")


def save_tensor(path: str | Path, values: np.ndarray) -> None:
    """Write one array as an EMBR container."""
    # note: asarray with order="C" keeps 0-d arrays 0-d
    values = np.asarray(values, dtype="<f8", order="C")
    payload = values.tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, DTYPE_F64, values.ndim))
        fh.write(struct.pack(f"<{values.ndim}I", *values.shape))
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def load_tensor(path: str | Path) -> np.ndarray:
    """Read an EMBR container, verifying structure and checksum."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ContainerFormatError(f"{path}: truncated header")
    magic, version, dtype, ndim = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ContainerFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ContainerFormatError(f"{path}: unsupported version {version}")
    if dtype != DTYPE_F64:
        raise ContainerFormatError(f"{path}: unknown dtype tag {dtype}")
    offset = _HEADER.size
    if len(raw) < offset + 4 * ndim:
        raise ContainerFormatError(f"{path}: truncated dims")
    dims = struct.unpack_from(f"<{ndim}I", raw, offset)
    offset += 4 * ndim
    count = 1
    for d in dims:
        count *= d
    payload_len = 8 * count
    if len(raw) != offset + payload_len + 4:
        raise ContainerFormatError(
            f"{path}: expected {offset + payload_len + 4} bytes, have {len(raw)}")
    payload = raw[offset:offset + payload_len]
    (crc,) = struct.unpack_from("<I", raw, offset + payload_len)
    if crc != (zlib.crc32(payload) & 0xFFFFFFFF):
        raise ContainerFormatError(f"{path}: payload checksum mismatch")
    return np.frombuffer(payload, dtype="<f8").reshape(dims).copy()


def save_bundle(directory: str | Path, tensors: dict[str, np.ndarray],
                meta: dict[str, str] | None = None) -> None:
    """Write a named-tensor bundle: one .embr per tensor plus a manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = sorted(tensors)
    for name in names:
        if not re.fullmatch(r"[A-Za-z0-9._-]+", name):
            raise ContainerFormatError(f"tensor name {name!r} is not file-safe")
        save_tensor(directory / f"{name}.embr", tensors[name])
    lines = [f"tensor={name}" for name in names]
    for key in sorted(meta or {}):
        if "=" in key or "\n" in key:
            raise ContainerFormatError(f"bundle meta key {key!r} is not plain")
        lines.append(f"{key}={(meta or {})[key]}")
    (directory / "bundle.txt").write_text("\n".join(lines) + "\n")


def load_bundle(directory: str | Path) -> tuple[dict[str, np.ndarray],
                                                dict[str, str]]:
    """Read a bundle back as (tensors, meta)."""
    directory = Path(directory)
    manifest = directory / "bundle.txt"
    if not manifest.is_file():
        raise ContainerFormatError(f"{directory}: missing bundle.txt")
    tensors: dict[str, np.ndarray] = {}
    meta: dict[str, str] = {}
    for line in manifest.read_text().splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        if key == "tensor":
            tensors[value] = load_tensor(directory / f"{value}.embr")
        else:
            meta[key] = value
    return tensors, meta
