"""Neurogram similarity (NSIM) between reference and test phaseograms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bands import BandMap
from .errors import DimensionMismatch, TooShort
from .spectral import Phaseogram

PATCH_FRAMES = 30


def fmean(values) -> float:
    """Correctly rounded sum divided by the count; independent of summation order."""
    values = list(values)
    return math.fsum(values) / len(values)


def gaussian_kernel(size: int = 3, sigma: float = 0.5) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    k = np.outer(g, g)
    return k / k.sum()


@dataclass(frozen=True)
class NsimParams:
    """Constants of the luminance/structure terms.

    Defaults adapt the SSIM conventions to phase: the dynamic range is the
    full principal-value span 2*pi.
    """

    dynamic_range: float = 2.0 * math.pi
    k1: float = 0.01
    k3: float = 0.03
    kernel_size: int = 3
    kernel_sigma: float = 0.5

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c3(self) -> float:
        return (self.k3 * self.dynamic_range) ** 2 / 2.0

    @property
    def kernel(self) -> np.ndarray:
        return gaussian_kernel(self.kernel_size, self.kernel_sigma)


class AlignmentPolicy:
    """How test patches are paired with reference patches.

    ``search_frames == 0`` pairs patches at identical start frames. A positive
    value tries every test offset within +/- that many frames and keeps the one
    with the highest patch score.
    """

    def __init__(self, search_frames: int = 0):
        if search_frames < 0:
            raise ValueError("search_frames must be >= 0")
        self.search_frames = int(search_frames)

    def __repr__(self):
        return f"AlignmentPolicy(search_frames={self.search_frames})"

    def __eq__(self, other):
        return isinstance(other, AlignmentPolicy) and other.search_frames == self.search_frames

    def __hash__(self):
        return hash(self.search_frames)


DEFAULT_ALIGNMENT = AlignmentPolicy(0)


@dataclass(frozen=True, eq=False)
class Patch:
    values: np.ndarray
    start_frame: int


@dataclass(frozen=True)
class ChannelScore:
    """Per-channel similarity.

    ``raw_nsim`` is the mean of ``patch_scores`` (pre-clamp); ``nsim`` is that
    value clamped to [0, 1]. ``offsets`` records the frame offset chosen for
    each test patch (all zero under same-index alignment).
    """

    nsim: float
    raw_nsim: float
    patch_scores: tuple[float, ...]
    band_scores: tuple[tuple[float, ...], ...]
    offsets: tuple[int, ...] = field(default=())

    @property
    def n_patches(self) -> int:
        return len(self.patch_scores)


def segment_patches(phaseogram: Phaseogram | np.ndarray, patch_frames: int = PATCH_FRAMES) -> list[Patch]:
    """Split into consecutive non-overlapping patches; a short tail is discarded."""
    values = phaseogram.values if isinstance(phaseogram, Phaseogram) else np.asarray(phaseogram)
    n_frames = values.shape[1]
    if n_frames < patch_frames:
        raise TooShort(f"{n_frames} frames, need at least {patch_frames} for one patch")
    return [Patch(values[:, s:s + patch_frames], s)
            for s in range(0, n_frames - patch_frames + 1, patch_frames)]


def _shifted_stack(x: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Neighbourhood stack of shape (size*size, rows, cols) plus a validity mask."""
    r = size // 2
    rows, cols = x.shape
    padded = np.zeros((rows + 2 * r, cols + 2 * r))
    valid = np.zeros_like(padded)
    padded[r:r + rows, r:r + cols] = x
    valid[r:r + rows, r:r + cols] = 1.0
    vals = np.empty((size * size, rows, cols))
    mask = np.empty_like(vals)
    i = 0
    for dy in range(size):
        for dx in range(size):
            vals[i] = padded[dy:dy + rows, dx:dx + cols]
            mask[i] = valid[dy:dy + rows, dx:dx + cols]
            i += 1
    return vals, mask


def local_stats(ref: np.ndarray, test: np.ndarray, kernel: np.ndarray):
    """Kernel-weighted local means, standard deviations and covariance.

    At the borders the kernel is truncated to the in-bounds taps and
    renormalised. Variances are computed from centered values and floored at 0.
    """
    size = kernel.shape[0]
    r_vals, mask = _shifted_stack(ref, size)
    t_vals, _ = _shifted_stack(test, size)
    w = kernel.reshape(-1, 1, 1) * mask
    w = w / w.sum(axis=0)
    mu_r = (w * r_vals).sum(axis=0)
    mu_t = (w * t_vals).sum(axis=0)
    dr = r_vals - mu_r
    dt = t_vals - mu_t
    var_r = np.maximum((w * dr * dr).sum(axis=0), 0.0)
    var_t = np.maximum((w * dt * dt).sum(axis=0), 0.0)
    cov = (w * (dr * dt)).sum(axis=0)
    return mu_r, mu_t, np.sqrt(var_r), np.sqrt(var_t), cov


def nsim_map(ref_patch, test_patch, params: NsimParams = NsimParams()) -> np.ndarray:
    """Per-pixel NSIM = luminance * structure."""
    ref = ref_patch.values if isinstance(ref_patch, Patch) else np.asarray(ref_patch, dtype=np.float64)
    test = test_patch.values if isinstance(test_patch, Patch) else np.asarray(test_patch, dtype=np.float64)
    if ref.shape != test.shape:
        raise DimensionMismatch(f"patch shapes differ: {ref.shape} vs {test.shape}")
    mu_r, mu_t, sd_r, sd_t, cov = local_stats(ref, test, params.kernel)
    c1, c3 = params.c1, params.c3
    luminance = (2.0 * (mu_r * mu_t) + c1) / (mu_r * mu_r + mu_t * mu_t + c1)
    structure = (cov + c3) / (sd_r * sd_t + c3)
    return luminance * structure


def band_average(sim_map: np.ndarray, band_map: BandMap) -> np.ndarray:
    """Mean of all pixels of each band (every frame of the patch)."""
    sim_map = np.asarray(sim_map)
    if sim_map.shape[0] != band_map.n_bins:
        raise DimensionMismatch(f"map has {sim_map.shape[0]} rows, band map covers {band_map.n_bins} bins")
    return np.array([fmean(sim_map[s].ravel().tolist()) for s in band_map.slices()])


def _patch_score(ref: np.ndarray, test: np.ndarray, band_map: BandMap,
                 params: NsimParams) -> tuple[float, np.ndarray]:
    bands = band_average(nsim_map(ref, test, params), band_map)
    return fmean(bands.tolist()), bands


def channel_nsim(ref: Phaseogram, test: Phaseogram, band_map: BandMap,
                 params: NsimParams = NsimParams(),
                 alignment: AlignmentPolicy = DEFAULT_ALIGNMENT) -> ChannelScore:
    """Mean patch similarity between two phaseograms of one channel."""
    ref_v = ref.values if isinstance(ref, Phaseogram) else np.asarray(ref)
    test_v = test.values if isinstance(test, Phaseogram) else np.asarray(test)
    if ref_v.shape[0] != test_v.shape[0]:
        raise DimensionMismatch(f"bin counts differ: {ref_v.shape[0]} vs {test_v.shape[0]}")
    patches = segment_patches(ref_v)
    n_test = test_v.shape[1]

    patch_scores, band_scores, offsets = [], [], []
    for patch in patches:
        best = None
        for off in range(-alignment.search_frames, alignment.search_frames + 1):
            start = patch.start_frame + off
            if start < 0 or start + PATCH_FRAMES > n_test:
                continue
            score, bands = _patch_score(patch.values, test_v[:, start:start + PATCH_FRAMES],
                                        band_map, params)
            # ties keep the smallest |offset|, preferring 0
            if best is None or score > best[0] or (score == best[0] and abs(off) < abs(best[2])):
                best = (score, bands, off)
        if best is None:
            raise TooShort(f"test has {n_test} frames; no patch at frame {patch.start_frame}")
        patch_scores.append(best[0])
        band_scores.append(tuple(best[1].tolist()))
        offsets.append(best[2])

    raw = fmean(patch_scores)
    return ChannelScore(nsim=min(max(raw, 0.0), 1.0), raw_nsim=raw,
                        patch_scores=tuple(patch_scores), band_scores=tuple(band_scores),
                        offsets=tuple(offsets))
