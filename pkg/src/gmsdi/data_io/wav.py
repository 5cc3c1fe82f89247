"""Minimal RIFF/WAVE codec: PCM-16 and IEEE float-32, mono or interleaved."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..core import AudioTensor
from ..errors import ConfigurationError, FormatError

WAVE_FORMAT_PCM = 1
WAVE_FORMAT_IEEE_FLOAT = 3
WAVE_FORMAT_EXTENSIBLE = 0xFFFE
_SUPPORTED = {(WAVE_FORMAT_PCM, 16): "<i2", (WAVE_FORMAT_IEEE_FLOAT, 32): "<f4"}


def wav_read(path: str | Path) -> AudioTensor:
    path = Path(path)
    data = path.read_bytes()
    p = str(path)
    if len(data) < 12:
        raise FormatError("file too short for a RIFF header", field="riff", path=p)
    riff, _, wave = struct.unpack("<4sI4s", data[:12])
    if riff != b"RIFF":
        raise FormatError("missing RIFF magic", field="riff", path=p)
    if wave != b"WAVE":
        raise FormatError("missing WAVE form type", field="wave", path=p)

    fmt = None
    samples = None
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack("<4sI", data[pos:pos + 8])
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            name = "data" if cid == b"data" else cid.decode("latin-1").strip()
            raise FormatError(f"chunk {cid!r} truncated: {len(body)} of {size} bytes", field=name, path=p)
        if cid == b"fmt ":
            fmt = _parse_fmt(body, p)
        elif cid == b"data":
            if fmt is None:
                raise FormatError("data chunk precedes fmt chunk", field="fmt", path=p)
            samples = body
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise FormatError("no fmt chunk", field="fmt", path=p)
    if samples is None:
        raise FormatError("no data chunk", field="data", path=p)

    code, channels, rate, dtype, block = fmt
    if len(samples) % block:
        raise FormatError("data size is not a whole number of frames", field="data", path=p)
    raw = np.frombuffer(samples, dtype=dtype)
    if code == WAVE_FORMAT_PCM:
        arr = raw.astype(np.float64) / 32768.0
    else:
        arr = raw.astype(np.float64)
    if raw.size == 0:
        raise FormatError("data chunk holds no frames", field="data", path=p)
    try:
        return AudioTensor(arr.reshape(-1, channels).T, rate)
    except ValueError as exc:
        raise FormatError(str(exc), field="data", path=p) from exc


def _parse_fmt(body: bytes, p: str):
    if len(body) < 16:
        raise FormatError("fmt chunk shorter than 16 bytes", field="fmt", path=p)
    code, channels, rate, byte_rate, block, bits = struct.unpack("<HHIIHH", body[:16])
    if code == WAVE_FORMAT_EXTENSIBLE:
        if len(body) < 26:
            raise FormatError("extensible fmt chunk too short", field="fmt", path=p)
        code = struct.unpack("<H", body[24:26])[0]
    if channels < 1:
        raise FormatError(f"channel count {channels}", field="num_channels", path=p)
    if rate < 1:
        raise FormatError(f"sample rate {rate}", field="sample_rate", path=p)
    if (code, bits) not in _SUPPORTED:
        if code not in (WAVE_FORMAT_PCM, WAVE_FORMAT_IEEE_FLOAT):
            raise FormatError(f"unsupported codec {code}", field="audio_format", path=p)
        raise FormatError(f"unsupported sample width {bits} for codec {code}", field="bits_per_sample", path=p)
    if block != channels * bits // 8:
        raise FormatError(f"block_align {block} inconsistent with {channels}x{bits} bits", field="block_align", path=p)
    if byte_rate != rate * block:
        raise FormatError(f"byte_rate {byte_rate} != sample_rate*block_align", field="byte_rate", path=p)
    return code, channels, rate, _SUPPORTED[(code, bits)], block


def wav_write(path: str | Path, audio: AudioTensor, encoding: str = "float32") -> None:
    """Write ``audio``; ``encoding`` is ``"float32"`` or ``"pcm16"`` (clipped)."""
    frames = audio.samples.T
    if encoding == "float32":
        code, bits = WAVE_FORMAT_IEEE_FLOAT, 32
        payload = frames.astype("<f4").tobytes()
    elif encoding == "pcm16":
        code, bits = WAVE_FORMAT_PCM, 16
        q = np.clip(np.round(frames * 32768.0), -32768, 32767)
        payload = q.astype("<i2").tobytes()
    else:
        raise ConfigurationError(f"unknown wav encoding {encoding!r}")
    block = audio.channels * bits // 8
    fmt = struct.pack("<HHIIHH", code, audio.channels, audio.sample_rate, audio.sample_rate * block, block, bits)
    pad = b"\x00" if len(payload) & 1 else b""
    header = struct.pack("<4sI4s", b"RIFF", 4 + 8 + len(fmt) + 8 + len(payload) + len(pad), b"WAVE")
    chunks = struct.pack("<4sI", b"fmt ", len(fmt)) + fmt + struct.pack("<4sI", b"data", len(payload))
    Path(path).write_bytes(header + chunks + payload + pad)
