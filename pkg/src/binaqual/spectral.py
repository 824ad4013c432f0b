"""STFT phase spectrograms ("phaseograms")."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SignalTooShort

RETAINED_BINS = 640


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 2048
    window_len: int = 1536
    hop: int = 768
    window_kind: str = "hamming"

    def __post_init__(self):
        if self.window_kind != "hamming":
            raise ValueError("only the Hamming window is supported")
        if not 2 <= self.window_len <= self.fft_size:
            raise ValueError("window_len must lie in [2, fft_size]")
        if self.hop != self.window_len // 2 or self.window_len % 2:
            raise ValueError("hop must be exactly half of an even window_len")

    def frame_count(self, n_samples: int) -> int:
        if n_samples < self.window_len:
            return 0
        return (n_samples - self.window_len) // self.hop + 1


@dataclass(frozen=True, eq=False)
class Phaseogram:
    """Phase angles in radians, shape ``(bins, frames)``."""

    values: np.ndarray
    sample_rate_hz: int
    hop: int

    @property
    def n_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    @property
    def frame_duration_s(self) -> float:
        return self.hop / self.sample_rate_hz


def hamming_window(length: int) -> np.ndarray:
    """Symmetric Hamming window, ``0.54 - 0.46 cos(2 pi n / (length - 1))``."""
    if length < 2:
        raise ValueError("window length must be at least 2")
    n = np.arange((length + 1) // 2)
    half = 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (length - 1))
    # mirror so the window is bit-exactly symmetric
    return np.concatenate([half, half[:length // 2][::-1]])


def dft_reference(segment) -> np.ndarray:
    """Definitional O(n^2) DFT; used to cross-check the fast transform."""
    x = np.asarray(segment, dtype=np.complex128)
    n = x.shape[0]
    if n < 1:
        raise ValueError("segment must be non-empty")
    k = np.arange(n)
    # reduce k*m modulo n before scaling so the twiddle angles stay exact for large n
    twiddle = np.exp(-2j * np.pi * (np.outer(k, k) % n) / n)
    return twiddle @ x


def _frames(signal: np.ndarray, config: StftConfig) -> np.ndarray:
    n_frames = config.frame_count(signal.shape[0])
    starts = np.arange(n_frames) * config.hop
    idx = starts[:, None] + np.arange(config.window_len)[None, :]
    return signal[idx]


def stft(signal, config: StftConfig = StftConfig()) -> np.ndarray:
    """Complex STFT, shape ``(fft_size // 2 + 1, frames)``.

    Frame ``f`` covers ``[f * hop, f * hop + window_len)``; the windowed segment
    sits at the start of the FFT frame and the tail is zero-padded. Samples that
    do not fill a whole window are dropped. Complex (analytic) input is
    accepted; its non-negative frequency bins are returned.
    """
    x = np.asarray(signal)
    x = x.astype(np.complex128 if np.iscomplexobj(x) else np.float64)
    if x.ndim != 1:
        raise ValueError("stft expects a single channel")
    if x.shape[0] < config.window_len:
        raise SignalTooShort(f"{x.shape[0]} samples, need at least {config.window_len}")
    segments = _frames(x, config) * hamming_window(config.window_len)
    if np.iscomplexobj(segments):
        spec = np.fft.fft(segments, n=config.fft_size, axis=1)[:, :config.fft_size // 2 + 1]
    else:
        spec = np.fft.rfft(segments, n=config.fft_size, axis=1)
    return spec.T


def stft_phase(signal, config: StftConfig = StftConfig(), sample_rate_hz: int = 48000,
               retained_bins: int = RETAINED_BINS) -> Phaseogram:
    """Phaseogram of the first ``retained_bins`` bins.

    Angles are principal values in (-pi, pi]; bins with exactly zero magnitude
    get phase 0.
    """
    spec = stft(signal, config)[:retained_bins]
    phase = np.angle(spec)
    # atan2 returns -pi for (negative real, -0.0 imag); fold it onto +pi
    phase[phase == -np.pi] = np.pi
    phase[spec == 0] = 0.0
    return Phaseogram(phase, int(sample_rate_hz), config.hop)
