"""Full-reference localization similarity for binaural audio.

Each channel of a reference and a test recording is turned into a phase
spectrogram, compared patch by patch with NSIM (averaged over 32 ERB bands),
and the two channel scores are multiplied.

>>> from binaqual import binaqual, read_wav
>>> result = binaqual(read_wav("ref.wav"), read_wav("test.wav"))  # doctest: +SKIP
>>> result.ls  # doctest: +SKIP
"""

__version__ = "0.1.0"

from .audio_io import AudioBuffer, ValidatedPair, read_wav, validate_pair, write_wav
from .bands import BandMap, build_band_map, erb_rate
from .errors import BinaqualError, Notice
from .harness import BatchReport, ManifestEntry, box_cox, pearson, run_batch, spearman
from .metric import LocalizationResult, MetricConfig, binaqual
from .nsim import AlignmentPolicy, ChannelScore, NsimParams, band_average, channel_nsim, nsim_map, segment_patches
from .spectral import Phaseogram, StftConfig, dft_reference, hamming_window, stft_phase
from .synthkit import PanSpec, StimulusSpec, degrade, generate, pan_binaural

__all__ = [
    "AudioBuffer", "ValidatedPair", "read_wav", "validate_pair", "write_wav",
    "BandMap", "build_band_map", "erb_rate",
    "BinaqualError", "Notice",
    "BatchReport", "ManifestEntry", "box_cox", "pearson", "run_batch", "spearman",
    "LocalizationResult", "MetricConfig", "binaqual",
    "AlignmentPolicy", "ChannelScore", "NsimParams", "band_average", "channel_nsim", "nsim_map",
    "segment_patches",
    "Phaseogram", "StftConfig", "dft_reference", "hamming_window", "stft_phase",
    "PanSpec", "StimulusSpec", "degrade", "generate", "pan_binaural",
]
