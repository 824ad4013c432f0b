"""Exception hierarchy and non-fatal warning records."""

from __future__ import annotations

from dataclasses import dataclass


class BinaqualError(Exception):
    """Base class for every error raised by the package.

    ``category`` is the short machine-readable tag the CLI prints on stderr.
    """

    category = "error"


class AudioFormatError(BinaqualError):
    category = "audio-format"


class MalformedContainer(AudioFormatError):
    category = "malformed-container"


class UnsupportedEncoding(AudioFormatError):
    category = "unsupported-encoding"


class UnsupportedChannelCount(AudioFormatError):
    category = "unsupported-channel-count"


class IoFailure(BinaqualError):
    category = "io-failure"


class ChannelCountMismatch(BinaqualError):
    category = "channel-count-mismatch"


class SampleRateMismatch(BinaqualError):
    category = "sample-rate-mismatch"


class SignalTooShort(BinaqualError):
    category = "signal-too-short"


class TooShort(BinaqualError):
    category = "too-short"


class DimensionMismatch(BinaqualError):
    category = "dimension-mismatch"


class DegenerateBand(BinaqualError):
    category = "degenerate-band"


class DegenerateInput(BinaqualError):
    category = "degenerate-input"


class NonPositiveValue(BinaqualError):
    category = "non-positive-value"


class EmptyManifest(BinaqualError):
    category = "empty-manifest"


class InvalidSpec(BinaqualError):
    category = "invalid-spec"


class ClippingDetected(UserWarning):
    """Emitted by ``write_wav`` when samples exceed full scale and are saturated."""


@dataclass(frozen=True)
class Notice:
    """A non-fatal condition carried alongside a result (e.g. length truncation)."""

    code: str
    detail: str

    def to_dict(self) -> dict:
        return {"code": self.code, "detail": self.detail}
