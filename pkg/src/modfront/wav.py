"""Minimal RIFF/WAVE reader and writer (PCM16 and IEEE float32)."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ArtifactIOError, ConfigError
from .filterbank import Waveform

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class WavFormatError(ArtifactIOError):
    """Header or chunk structure is not a valid RIFF/WAVE file."""


class UnsupportedCodecError(ArtifactIOError):
    """Valid WAVE file in an encoding other than PCM16 or float32."""


class SampleRateMismatchError(ConfigError):
    """File sample rate differs from the configured one."""


def _chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise WavFormatError(f"chunk {cid!r} truncated: {len(body)} of {size} bytes")
        yield cid, body
        pos += 8 + size + (size & 1)


def decode_wav(data: bytes) -> tuple[np.ndarray, int]:
    """Samples as ``(frames, channels)`` float64 and the sample rate."""
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError("malformed header: not a RIFF/WAVE file")
    fmt = payload = None
    for cid, body in _chunks(data):
        if cid == b"fmt ":
            fmt = body
        elif cid == b"data":
            payload = body
    if fmt is None or len(fmt) < 16:
        raise WavFormatError("malformed header: missing or short 'fmt ' chunk")
    if payload is None:
        raise WavFormatError("malformed file: no 'data' chunk")
    tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt)
    if tag == WAVE_FORMAT_EXTENSIBLE:
        if len(fmt) < 26:
            raise WavFormatError("malformed header: short WAVE_FORMAT_EXTENSIBLE chunk")
        tag = struct.unpack_from("<H", fmt, 24)[0]
    if channels < 1 or rate < 1 or block_align != channels * bits // 8:
        raise WavFormatError(
            f"malformed header: channels={channels} rate={rate} block_align={block_align} bits={bits}"
        )
    if tag == WAVE_FORMAT_PCM and bits == 16:
        dtype, scale = "<i2", 1.0 / 32768.0
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype, scale = "<f4", 1.0
    else:
        raise UnsupportedCodecError(
            f"unsupported codec: format tag {tag:#06x} with {bits} bits (need PCM16 or float32)"
        )
    n = len(payload) // block_align
    samples = np.frombuffer(payload[: n * block_align], dtype=dtype).astype(np.float64) * scale
    return samples.reshape(n, channels), rate


def resample_linear(x: np.ndarray, src_rate: int, dst_rate: int) -> np.ndarray:
    """Linear interpolation onto the ``dst_rate`` grid over the same time span."""
    n_out = int(np.floor((x.size - 1) * dst_rate / src_rate)) + 1
    t_out = np.arange(n_out) / dst_rate
    return np.interp(t_out, np.arange(x.size) / src_rate, x)


def read_wav(path, sample_rate: int | None = None, allow_resample: bool = False) -> Waveform:
    """Load a WAV as a mono :class:`Waveform` (channels averaged)."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc}") from exc
    samples, rate = decode_wav(data)
    mono = samples.mean(axis=1)
    if mono.size == 0:
        raise WavFormatError(f"{path} contains no samples")
    if sample_rate is not None and rate != sample_rate:
        if not allow_resample:
            raise SampleRateMismatchError(
                f"{path} has sample rate {rate} Hz but the configuration expects {sample_rate} Hz "
                "(pass --resample-linear to convert)"
            )
        mono = resample_linear(mono, rate, sample_rate)
        rate = sample_rate
    return Waveform(mono, rate)


def write_wav(path, samples, sample_rate: int, codec: str = "pcm16") -> None:
    """Write ``(frames,)`` or ``(frames, channels)`` samples."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    channels = x.shape[1]
    if codec == "pcm16":
        payload = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2").tobytes()
        tag, bits = WAVE_FORMAT_PCM, 16
    elif codec == "float32":
        payload = x.astype("<f4").tobytes()
        tag, bits = WAVE_FORMAT_IEEE_FLOAT, 32
    else:
        raise ConfigError(f"unknown codec {codec!r}")
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, channels, sample_rate, sample_rate * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload + (b"\0" if len(payload) & 1 else b"")
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
