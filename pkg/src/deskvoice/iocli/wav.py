"""Mono PCM16 WAV reading and writing.

The header is parsed by hand so that malformed files can be reported with
the byte offset where parsing failed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from deskvoice.errors import DataError, FormatError

_PCM16_SCALE = 32768.0


@dataclass
class AudioBuffer:
    """Mono audio: float samples in [-1, 1] at a declared sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32).reshape(-1)
        if not np.all(np.isfinite(self.samples)):
            raise DataError("audio samples must be finite")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)


def wav_write(buffer: AudioBuffer, path: str | Path) -> None:
    """Write mono 16-bit PCM. Samples are clamped to [-1, 1] first."""
    clamped = np.clip(buffer.samples, -1.0, 1.0)
    ints = np.clip(np.rint(clamped * _PCM16_SCALE), -32768, 32767).astype("<i2")
    data = ints.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(data),
        b"WAVE",
        b"fmt ",
        16,
        1,  # PCM
        1,  # mono
        buffer.sample_rate,
        buffer.sample_rate * 2,
        2,
        16,
        b"data",
        len(data),
    )
    Path(path).write_bytes(header + data)


def wav_read(path: str | Path) -> AudioBuffer:
    """Read a mono 16-bit PCM RIFF/WAVE file."""
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise FormatError("file too short for a RIFF header", offset=len(raw))
    if raw[0:4] != b"RIFF":
        raise FormatError("missing RIFF magic", offset=0)
    if raw[8:12] != b"WAVE":
        raise FormatError("missing WAVE form type", offset=8)

    sample_rate = None
    samples = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        body = pos + 8
        if body + chunk_size > len(raw):
            raise FormatError(f"chunk {chunk_id!r} overruns file", offset=pos)
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise FormatError("fmt chunk too short", offset=body)
            fmt, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", raw, body)
            if fmt != 1:
                raise FormatError(f"unsupported encoding {fmt} (PCM required)", offset=body)
            if channels != 1:
                raise FormatError(f"unsupported channel count {channels} (mono required)", offset=body + 2)
            if bits != 16:
                raise FormatError(f"unsupported bit depth {bits} (16-bit required)", offset=body + 14)
            sample_rate = rate
        elif chunk_id == b"data":
            ints = np.frombuffer(raw, dtype="<i2", count=chunk_size // 2, offset=body)
            samples = ints.astype(np.float32) / _PCM16_SCALE
        pos = body + chunk_size + (chunk_size & 1)

    if sample_rate is None:
        raise FormatError("no fmt chunk found", offset=pos)
    if samples is None:
        raise FormatError("no data chunk found", offset=pos)
    return AudioBuffer(samples, sample_rate)
