"""Single-file checkpoint container.

Layout (all integers little-endian)::

    magic   4 bytes  b"DVCK"
    version u16      currently 1
    u32     config blob length, then UTF-8 config text (flat key-value)
    u32     tensor count
    per tensor:
        u16 name length, UTF-8 name
        u8  rank, then u32 per dimension
        raw float32 little-endian data, row-major
    sha256  32 bytes over everything above

Parameters load back bitwise identical; any corruption fails the checksum.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from deskvoice.errors import FormatError
from deskvoice.iocli.config import format_config, parse_config

MAGIC = b"DVCK"
VERSION = 1


def save_checkpoint(path: str | Path, config: dict, tensors: dict[str, np.ndarray]) -> None:
    parts = [MAGIC, struct.pack("<H", VERSION)]
    blob = format_config(config).encode("utf-8")
    parts.append(struct.pack("<I", len(blob)))
    parts.append(blob)
    parts.append(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    payload = b"".join(parts)
    digest = hashlib.sha256(payload).digest()
    Path(path).write_bytes(payload + digest)


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if len(raw) < 32 + 10:
        raise FormatError("checkpoint truncated", offset=len(raw))
    payload, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise FormatError("checkpoint checksum mismatch (file corrupted)", offset=len(payload))
    if payload[:4] != MAGIC:
        raise FormatError("bad checkpoint magic", offset=0)
    (version,) = struct.unpack_from("<H", payload, 4)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)
    pos = 6
    (config_len,) = struct.unpack_from("<I", payload, pos)
    pos += 4
    config = parse_config(payload[pos : pos + config_len].decode("utf-8"))
    pos += config_len
    (count,) = struct.unpack_from("<I", payload, pos)
    pos += 4
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", payload, pos)
        pos += 2
        name = payload[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (rank,) = struct.unpack_from("<B", payload, pos)
        pos += 1
        shape = struct.unpack_from(f"<{rank}I", payload, pos)
        pos += 4 * rank
        n = int(np.prod(shape)) if rank else 1
        end = pos + 4 * n
        if end > len(payload):
            raise FormatError(f"tensor {name!r} overruns checkpoint", offset=pos)
        tensors[name] = np.frombuffer(payload[pos:end], dtype="<f4").reshape(shape).copy()
        pos = end
    if pos != len(payload):
        raise FormatError("trailing bytes after last tensor", offset=pos)
    return config, tensors
