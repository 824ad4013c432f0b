"""Assignment of retained FFT bins to ERB-spaced critical bands."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateBand


def erb_rate(freq_hz):
    """Glasberg & Moore ERB-rate (ERB-number) of a frequency in Hz."""
    f = np.asarray(freq_hz, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("frequency must be non-negative")
    out = 21.4 * np.log10(0.00437 * f + 1.0)
    return float(out) if out.ndim == 0 else out


def erb_rate_to_hz(rate):
    r = np.asarray(rate, dtype=np.float64)
    out = (10.0 ** (r / 21.4) - 1.0) / 0.00437
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class BandMap:
    band_of_bin: np.ndarray    # (retained_bins,) int
    band_centers_hz: np.ndarray  # (n_bands,)
    band_edges_hz: np.ndarray    # (n_bands + 1,)

    @property
    def n_bands(self) -> int:
        return self.band_centers_hz.shape[0]

    @property
    def n_bins(self) -> int:
        return self.band_of_bin.shape[0]

    def bin_counts(self) -> np.ndarray:
        return np.bincount(self.band_of_bin, minlength=self.n_bands)

    def slices(self) -> list[slice]:
        """Contiguous bin range of each band (valid because assignment is monotone)."""
        bounds = np.concatenate([[0], np.cumsum(self.bin_counts())])
        return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


@lru_cache(maxsize=16)
def build_band_map(sample_rate_hz: int = 48000, fft_size: int = 2048, retained_bins: int = 640,
                   n_bands: int = 32, f_min_hz: float = 50.0) -> BandMap:
    """Partition the retained bins into ``n_bands`` bands uniform on the ERB-rate scale.

    Centers run from ``f_min_hz`` to the frequency of the last retained bin.
    Inner edges sit at ERB-rate midpoints between neighbouring centers; the
    outer edges are 0 Hz and Nyquist. A bin belongs to the band whose
    half-open interval ``[lo, hi)`` contains its center frequency.
    """
    if retained_bins > fft_size // 2 + 1 or retained_bins < 1:
        raise ValueError("retained_bins must lie in [1, fft_size/2 + 1]")
    if n_bands < 1:
        raise ValueError("n_bands must be >= 1")
    bin_hz = np.arange(retained_bins) * sample_rate_hz / fft_size
    f_top = float(bin_hz[-1])
    if not 0 <= f_min_hz < f_top:
        raise ValueError("f_min_hz must lie below the top retained frequency")

    if n_bands == 1:
        centers_rate = np.array([erb_rate(f_min_hz)])
    else:
        centers_rate = np.linspace(erb_rate(f_min_hz), erb_rate(f_top), n_bands)
    centers = erb_rate_to_hz(centers_rate)
    inner = erb_rate_to_hz(0.5 * (centers_rate[:-1] + centers_rate[1:]))
    edges = np.concatenate([[0.0], np.atleast_1d(inner), [sample_rate_hz / 2.0]])

    band_of_bin = np.searchsorted(edges[1:-1], bin_hz, side="right")
    counts = np.bincount(band_of_bin, minlength=n_bands)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise DegenerateBand(f"bands {empty.tolist()} receive no bins")

    for arr in (band_of_bin, centers, edges):
        arr.flags.writeable = False
    return BandMap(band_of_bin, np.atleast_1d(centers), edges)
