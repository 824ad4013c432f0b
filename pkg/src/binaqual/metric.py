"""End-to-end localization similarity between a reference and a test binaural signal."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from .audio_io import AudioBuffer, validate_pair
from .bands import build_band_map
from .errors import Notice
from .nsim import DEFAULT_ALIGNMENT, AlignmentPolicy, ChannelScore, NsimParams, channel_nsim
from .spectral import RETAINED_BINS, StftConfig, stft_phase


@dataclass(frozen=True)
class MetricConfig:
    stft: StftConfig = field(default_factory=StftConfig)
    nsim: NsimParams = field(default_factory=NsimParams)
    retained_bins: int = RETAINED_BINS
    n_bands: int = 32
    f_min_hz: float = 50.0
    align_search_frames: int = 0

    def as_dict(self, sample_rate_hz: int | None = None) -> dict:
        d = {
            "stft": asdict(self.stft),
            "nsim": {**asdict(self.nsim), "c1": self.nsim.c1, "c3": self.nsim.c3},
            "retained_bins": self.retained_bins,
            "n_bands": self.n_bands,
            "f_min_hz": self.f_min_hz,
            "align_search_frames": self.align_search_frames,
        }
        if sample_rate_hz is not None:
            d["sample_rate_hz"] = sample_rate_hz
        return d

    def fingerprint(self, sample_rate_hz: int) -> str:
        blob = json.dumps(self.as_dict(sample_rate_hz), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class LocalizationResult:
    ls: float
    left: ChannelScore
    right: ChannelScore
    warnings: tuple[Notice, ...]
    config_fingerprint: str

    def to_dict(self, diagnostics: bool = False) -> dict:
        out = {
            "ls": self.ls,
            "nsim_left": self.left.nsim,
            "nsim_right": self.right.nsim,
            "n_patches": self.left.n_patches,
            "warnings": [w.to_dict() for w in self.warnings],
            "config_fingerprint": self.config_fingerprint,
        }
        if diagnostics:
            out["diagnostics"] = {
                side: {
                    "raw_nsim": score.raw_nsim,
                    "patch_scores": list(score.patch_scores),
                    "band_scores": [list(b) for b in score.band_scores],
                    "offsets": list(score.offsets),
                }
                for side, score in (("left", self.left), ("right", self.right))
            }
        return out


def binaqual(reference: AudioBuffer, test: AudioBuffer,
             config: MetricConfig = MetricConfig()) -> LocalizationResult:
    """Localization similarity: product of the left and right channel NSIM scores."""
    pair = validate_pair(reference, test)
    rate = pair.reference.sample_rate_hz
    band_map = build_band_map(rate, config.stft.fft_size, config.retained_bins,
                              config.n_bands, config.f_min_hz)
    alignment = AlignmentPolicy(config.align_search_frames) if config.align_search_frames else DEFAULT_ALIGNMENT

    scores = []
    for ch in (0, 1):
        ref_ph = stft_phase(pair.reference.channel(ch), config.stft, rate, config.retained_bins)
        test_ph = stft_phase(pair.test.channel(ch), config.stft, rate, config.retained_bins)
        scores.append(channel_nsim(ref_ph, test_ph, band_map, config.nsim, alignment))
    left, right = scores
    return LocalizationResult(ls=left.nsim * right.nsim, left=left, right=right,
                              warnings=pair.warnings,
                              config_fingerprint=config.fingerprint(rate))
