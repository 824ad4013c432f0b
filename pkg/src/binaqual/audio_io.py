"""WAV decoding/encoding and reference/test pair validation."""

from __future__ import annotations

import os
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ChannelCountMismatch,
    ClippingDetected,
    IoFailure,
    MalformedContainer,
    Notice,
    SampleRateMismatch,
    UnsupportedChannelCount,
    UnsupportedEncoding,
)

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

BIT_DEPTHS = ("16", "24", "32f")


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Immutable multichannel signal.

    ``samples`` has shape ``(channels, frames)`` and dtype float64. The array is
    marked read-only so a buffer can be shared between concurrent evaluations.
    """

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        data = np.array(self.samples, dtype=np.float64, copy=True)
        if data.ndim == 1:
            data = data[np.newaxis, :]
        if data.ndim != 2 or data.shape[0] < 1:
            raise ValueError("samples must be a (channels, frames) array")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError("sample_rate_hz must be positive")
        data.flags.writeable = False
        object.__setattr__(self, "samples", data)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @property
    def channel_count(self) -> int:
        return self.samples.shape[0]

    @property
    def n_frames(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.sample_rate_hz

    def channel(self, index: int) -> np.ndarray:
        return self.samples[index]

    def truncated(self, n_frames: int) -> "AudioBuffer":
        return AudioBuffer(self.samples[:, :n_frames], self.sample_rate_hz)

    def swapped(self) -> "AudioBuffer":
        """Left/right channel swap (stereo only)."""
        return AudioBuffer(self.samples[::-1], self.sample_rate_hz)

    def __eq__(self, other):
        if not isinstance(other, AudioBuffer):
            return NotImplemented
        return (self.sample_rate_hz == other.sample_rate_hz
                and self.samples.shape == other.samples.shape
                and bool(np.array_equal(self.samples, other.samples)))

    __hash__ = None


@dataclass(frozen=True)
class ValidatedPair:
    reference: AudioBuffer
    test: AudioBuffer
    warnings: tuple[Notice, ...] = field(default_factory=tuple)


def _parse_fmt(body: bytes) -> tuple[int, int, int, int]:
    if len(body) < 16:
        raise MalformedContainer("fmt chunk shorter than 16 bytes")
    code, channels, rate, _byte_rate, block_align, bits = struct.unpack("<HHIIHH", body[:16])
    if code == WAVE_FORMAT_EXTENSIBLE:
        if len(body) < 40:
            raise MalformedContainer("extensible fmt chunk shorter than 40 bytes")
        # first two bytes of the sub-format GUID carry the actual format code
        code = struct.unpack("<H", body[24:26])[0]
    if block_align != channels * (bits // 8):
        raise MalformedContainer(f"block_align {block_align} inconsistent with "
                                 f"{channels} channels of {bits} bits")
    return code, channels, rate, bits


def _decode(raw: bytes, code: int, channels: int, bits: int) -> np.ndarray:
    width = bits // 8
    usable = len(raw) - len(raw) % (width * channels)
    raw = raw[:usable]
    if code == WAVE_FORMAT_PCM and bits == 16:
        data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif code == WAVE_FORMAT_PCM and bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        data = ints.astype(np.float64) / float(1 << 23)
    elif code == WAVE_FORMAT_PCM and bits == 32:
        data = np.frombuffer(raw, dtype="<i4").astype(np.float64) / float(1 << 31)
    elif code == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        data = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        if not np.all(np.isfinite(data)):
            raise UnsupportedEncoding("float samples contain NaN or infinity")
        data = np.clip(data, -1.0, 1.0)
    else:
        raise UnsupportedEncoding(f"format code {code} with {bits} bits per sample")
    return data.reshape(-1, channels).T


def read_wav(path: str | os.PathLike) -> AudioBuffer:
    """Decode a RIFF/WAVE file into an :class:`AudioBuffer`.

    Integer PCM codes are divided by ``2**(bits-1)``; 32-bit float samples are
    kept as-is (clipped to [-1, 1]). Chunks other than ``fmt `` and ``data``
    are skipped.
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc.strerror or exc}") from exc

    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise MalformedContainer(f"{path} is not a RIFF/WAVE file")

    fmt = None
    raw = None
    pos = 12
    while pos + 8 <= len(blob):
        chunk_id = blob[pos:pos + 4]
        size = struct.unpack("<I", blob[pos + 4:pos + 8])[0]
        body = blob[pos + 8:pos + 8 + size]
        if chunk_id == b"fmt ":
            fmt = _parse_fmt(body)
        elif chunk_id == b"data":
            raw = body
        pos += 8 + size + (size & 1)

    if fmt is None or raw is None:
        raise MalformedContainer(f"{path} lacks a fmt or data chunk")
    code, channels, rate, bits = fmt
    if code not in (WAVE_FORMAT_PCM, WAVE_FORMAT_IEEE_FLOAT):
        raise UnsupportedEncoding(f"format code {code:#06x} is not PCM or IEEE float")
    if channels not in (1, 2):
        raise UnsupportedChannelCount(f"{channels} channels (only mono/stereo supported)")
    if rate <= 0:
        raise MalformedContainer("sample rate is zero")
    return AudioBuffer(_decode(raw, code, channels, bits), rate)


def _encode(samples: np.ndarray, bit_depth: str) -> tuple[bytes, int, int]:
    interleaved = samples.T.reshape(-1)
    if bit_depth == "32f":
        return interleaved.astype("<f4").tobytes(), WAVE_FORMAT_IEEE_FLOAT, 32
    bits = int(bit_depth)
    scale = float(1 << (bits - 1))
    codes = np.clip(np.round(interleaved * scale), -scale, scale - 1).astype(np.int32)
    if bits == 16:
        return codes.astype("<i2").tobytes(), WAVE_FORMAT_PCM, 16
    u = codes.astype("<u4")
    packed = np.stack([u & 0xFF, (u >> 8) & 0xFF, (u >> 16) & 0xFF], axis=1).astype(np.uint8)
    return packed.tobytes(), WAVE_FORMAT_PCM, 24


def write_wav(buffer: AudioBuffer, path: str | os.PathLike, bit_depth: str = "16") -> None:
    """Encode ``buffer`` as a little-endian WAV file.

    ``bit_depth`` is one of ``"16"``, ``"24"`` (integer PCM, saturating) or
    ``"32f"`` (IEEE float). Samples beyond full scale trigger a
    :class:`ClippingDetected` warning.
    """
    bit_depth = str(bit_depth)
    if bit_depth not in BIT_DEPTHS:
        raise ValueError(f"bit_depth must be one of {BIT_DEPTHS}, got {bit_depth!r}")
    n_clipped = int(np.count_nonzero(np.abs(buffer.samples) > 1.0))
    if n_clipped:
        warnings.warn(f"{n_clipped} samples exceed full scale and were saturated",
                      ClippingDetected, stacklevel=2)
    data, code, bits = _encode(np.clip(buffer.samples, -1.0, 1.0), bit_depth)
    channels = buffer.channel_count
    block_align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", code, channels, buffer.sample_rate_hz,
                      buffer.sample_rate_hz * block_align, block_align, bits)
    pad = b"\x00" if len(data) & 1 else b""
    body = (b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
            + b"data" + struct.pack("<I", len(data)) + data + pad)
    try:
        with open(path, "wb") as fh:
            fh.write(b"RIFF" + struct.pack("<I", len(body)) + body)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc.strerror or exc}") from exc


def validate_pair(reference: AudioBuffer, test: AudioBuffer) -> ValidatedPair:
    """Check that both buffers are stereo at one rate; truncate to the shorter length."""
    for name, buf in (("reference", reference), ("test", test)):
        if buf.channel_count != 2:
            raise ChannelCountMismatch(f"{name} has {buf.channel_count} channel(s), expected 2")
    if reference.sample_rate_hz != test.sample_rate_hz:
        raise SampleRateMismatch(f"sample rates differ: reference {reference.sample_rate_hz} Hz, "
                                 f"test {test.sample_rate_hz} Hz")
    notes = []
    if reference.n_frames != test.n_frames:
        n = min(reference.n_frames, test.n_frames)
        notes.append(Notice("LengthTruncated",
                            f"reference {reference.n_frames} frames, test {test.n_frames} frames; "
                            f"both truncated to {n}"))
        reference, test = reference.truncated(n), test.truncated(n)
    return ValidatedPair(reference, test, tuple(notes))
