"""Mono PCM clips: WAV reading/writing and fixed-hop framing."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, MalformedHeaderError, TruncatedDataError, UnsupportedFormatError

DEFAULT_HOP_S = 0.02

_PCM = 1
_IEEE_FLOAT = 3
_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1 or s.size == 0:
            raise InputError("audio clip needs a nonempty mono sample vector")
        if not np.isfinite(s).all():
            raise InputError("audio samples must be finite")
        if np.abs(s).max() > 1.0:
            raise InputError("audio samples must lie in [-1, 1]")
        if int(self.sample_rate_hz) <= 0:
            raise InputError("sample rate must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray  # (n_frames, samples_per_frame)
    hop_s: float
    sample_rate_hz: int

    def __len__(self) -> int:
        return self.frames.shape[0]


def samples_per_hop(sample_rate_hz: int, hop_s: float) -> int:
    exact = sample_rate_hz * hop_s
    n = int(round(exact))
    if n <= 0 or abs(exact - n) > 1e-9 * max(1.0, exact):
        raise InputError(f"hop of {hop_s} s is not a whole number of samples at {sample_rate_hz} Hz")
    return n


def frame(clip: AudioClip, hop_s: float = DEFAULT_HOP_S) -> FrameSequence:
    """Split into non-overlapping ``hop_s`` windows, dropping a trailing partial window."""
    n = samples_per_hop(clip.sample_rate_hz, hop_s)
    count = len(clip) // n
    if count == 0:
        raise InputError(f"clip of {clip.duration_s:.4f} s is shorter than one {hop_s} s hop")
    return FrameSequence(clip.samples[: count * n].reshape(count, n), hop_s, clip.sample_rate_hz)


def load_wav(path: str | os.PathLike) -> AudioClip:
    """Read a PCM (8/16/24-bit) or 32-bit float WAV file, downmixing stereo by averaging.

    Integer samples are divided by ``2**(bits - 1)`` (8-bit data is unsigned
    and recentred first). Unknown chunks are skipped.
    """
    return parse_wav(Path(path).read_bytes())


def parse_wav(data: bytes) -> AudioClip:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedHeaderError("not a RIFF/WAVE file")
    pos = 12
    fmt = None
    payload = None
    while pos + 8 <= len(data):
        cid, size = data[pos : pos + 4], struct.unpack_from("<I", data, pos + 4)[0]
        body = pos + 8
        if cid == b"fmt ":
            if size < 16 or body + size > len(data):
                raise MalformedHeaderError("fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", data, body)
            if fmt[0] == _EXTENSIBLE and size >= 26:
                sub = struct.unpack_from("<H", data, body + 24)[0]
                fmt = (sub,) + fmt[1:]
        elif cid == b"data":
            if fmt is None:
                raise MalformedHeaderError("data chunk precedes fmt chunk")
            if body + size > len(data):
                raise TruncatedDataError(f"data chunk declares {size} bytes, {len(data) - body} present")
            payload = data[body : body + size]
            break
        pos = body + size + (size & 1)
    if fmt is None:
        raise MalformedHeaderError("missing fmt chunk")
    if payload is None:
        raise MalformedHeaderError("missing data chunk")

    tag, channels, rate, _, block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedFormatError(f"{channels} channels; only mono and stereo are supported")
    if tag == _PCM and bits in (8, 16, 24):
        samples = _decode_pcm(payload, bits)
    elif tag == _IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(payload[: len(payload) // 4 * 4], dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedFormatError(f"format tag {tag:#06x} with {bits}-bit samples")
    width = bits // 8
    if len(payload) % (width * channels):
        raise TruncatedDataError("data chunk ends inside a sample frame")
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    if samples.size == 0:
        raise TruncatedDataError("data chunk holds no samples")
    return AudioClip(samples, rate)


def _decode_pcm(payload: bytes, bits: int) -> np.ndarray:
    if bits == 8:
        return (np.frombuffer(payload, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    if bits == 16:
        return np.frombuffer(payload[: len(payload) // 2 * 2], dtype="<i2").astype(np.float64) / 32768.0
    raw = np.frombuffer(payload[: len(payload) // 3 * 3], dtype=np.uint8).reshape(-1, 3).astype(np.int32)
    values = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
    values = np.where(values >= 1 << 23, values - (1 << 24), values)
    return values.astype(np.float64) / float(1 << 23)


def to_pcm16(samples: np.ndarray) -> np.ndarray:
    """Quantize ``[-1, 1]`` samples to int16 (inverse of the 16-bit read scaling)."""
    q = np.round(np.asarray(samples, dtype=np.float64) * 32768.0)
    return np.clip(q, -32768, 32767).astype("<i2")


def wav_bytes(clip: AudioClip, bits: int = 16) -> bytes:
    if bits == 16:
        payload = to_pcm16(clip.samples).tobytes()
        tag = _PCM
    elif bits == 32:
        payload = clip.samples.astype("<f4").tobytes()
        tag = _IEEE_FLOAT
    else:
        raise InputError("write_wav supports 16-bit PCM and 32-bit float")
    width = bits // 8
    fmt = struct.pack("<HHIIHH", tag, 1, clip.sample_rate_hz, clip.sample_rate_hz * width, width, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", 16) + fmt + b"data" + struct.pack("<I", len(payload)) + payload
    return b"RIFF" + struct.pack("<I", len(body)) + body


def write_wav(path: str | os.PathLike, clip: AudioClip, bits: int = 16) -> None:
    Path(path).write_bytes(wav_bytes(clip, bits))
