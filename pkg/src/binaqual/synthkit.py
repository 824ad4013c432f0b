"""Deterministic stimuli, an ITD/ILD azimuth panner and controlled degradations.

Azimuth convention: 0 deg is straight ahead, positive angles move the source
towards the listener's left (counter-clockwise seen from above), so the left
ear is the near ear for positive azimuths.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np
from scipy import signal as sps

from .audio_io import AudioBuffer
from .errors import InvalidSpec

KINDS = ("pure_tone", "white_noise", "pink_noise", "am_burst_noise")

# 3-pole / 3-zero approximation of a -3 dB/octave (1/f) slope; poles at
# 0.99572754, 0.94790649, 0.53567505 and zeros at 0.98443604, 0.83392334,
# 0.07568359 (Paul Kellet's "economy" pinking filter).
PINK_B = np.array([0.049922035, -0.095993537, 0.050612699, -0.004408786])
PINK_A = np.array([1.0, -2.494956002, 2.017265875, -0.522189400])
PINK_WARMUP = 8192

FRACTIONAL_DELAY_TAPS = 32
_FD_CENTER = FRACTIONAL_DELAY_TAPS // 2 - 1
_FD_KAISER_BETA = 8.0


@dataclass(frozen=True)
class StimulusSpec:
    kind: str
    duration_s: float = 2.0
    level_dbfs: float = -6.0
    freq_hz: float = 4000.0
    seed: int = 0
    burst_rate_hz: float = 4.0
    duty: float = 0.5
    color: str = "white"
    ramp_s: float = 0.01

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown stimulus kind {self.kind!r}; expected one of {KINDS}")
        if not self.duration_s >= 1.0:
            raise InvalidSpec(f"duration_s must be >= 1.0, got {self.duration_s}")
        if not self.level_dbfs <= 0:
            raise InvalidSpec(f"level_dbfs must be <= 0, got {self.level_dbfs}")
        if self.freq_hz <= 0:
            raise InvalidSpec("freq_hz must be positive")
        if self.burst_rate_hz <= 0 or not 0 < self.duty <= 1:
            raise InvalidSpec("burst_rate_hz must be positive and duty in (0, 1]")
        if self.color not in ("white", "pink"):
            raise InvalidSpec(f"color must be 'white' or 'pink', got {self.color!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "StimulusSpec":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known - {"name"}
        if extra:
            raise InvalidSpec(f"unknown stimulus fields: {sorted(extra)}")
        return cls(**{k: v for k, v in d.items() if k in known})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PanSpec:
    azimuth_deg: float = 0.0
    head_radius_m: float = 0.0875
    speed_of_sound_mps: float = 343.0
    ild_max_db: float = 12.0

    def __post_init__(self):
        if not -180.0 <= self.azimuth_deg < 180.0:
            raise InvalidSpec(f"azimuth_deg must lie in [-180, 180), got {self.azimuth_deg}")

    def to_dict(self) -> dict:
        return asdict(self)


def _white(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(n)


def _pink(n: int, rng: np.random.Generator) -> np.ndarray:
    x = rng.standard_normal(n + PINK_WARMUP)
    return sps.lfilter(PINK_B, PINK_A, x)[PINK_WARMUP:]


def burst_envelope(n: int, sample_rate_hz: int, rate_hz: float, duty: float,
                   ramp_s: float) -> np.ndarray:
    """Gate that is open for ``duty`` of each period, with raised-cosine on/off ramps."""
    t = np.arange(n) / sample_rate_hz
    phase = (t * rate_hz) % 1.0
    on_s = duty / rate_hz
    ramp = min(ramp_s, on_s / 2.0)
    pos = phase / rate_hz  # seconds into the current period
    env = np.where(pos < on_s, 1.0, 0.0)
    if ramp > 0:
        rise = pos < ramp
        fall = (pos >= on_s - ramp) & (pos < on_s)
        env = np.where(rise, 0.5 - 0.5 * np.cos(np.pi * pos / ramp), env)
        env = np.where(fall, 0.5 - 0.5 * np.cos(np.pi * (on_s - pos) / ramp), env)
    return env


def generate(spec: StimulusSpec, sample_rate_hz: int = 48000) -> AudioBuffer:
    """Render a mono stimulus whose peak sits at ``spec.level_dbfs``."""
    n = int(round(spec.duration_s * sample_rate_hz))
    peak = 10.0 ** (spec.level_dbfs / 20.0)
    if spec.kind == "pure_tone":
        x = np.sin(2.0 * np.pi * spec.freq_hz * np.arange(n) / sample_rate_hz)
        return AudioBuffer(peak * x, sample_rate_hz)

    rng = np.random.default_rng(spec.seed)
    if spec.kind == "white_noise":
        x = _white(n, rng)
    elif spec.kind == "pink_noise":
        x = _pink(n, rng)
    else:
        x = _pink(n, rng) if spec.color == "pink" else _white(n, rng)
        x = x * burst_envelope(n, sample_rate_hz, spec.burst_rate_hz, spec.duty, spec.ramp_s)
    return AudioBuffer(peak * x / np.max(np.abs(x)), sample_rate_hz)


def itd_seconds(azimuth_deg: float, pan: PanSpec = PanSpec()) -> float:
    """Woodworth ITD magnitude; rear azimuths mirror onto the front quadrant."""
    a = abs(azimuth_deg)
    if a > 90.0:
        a = 180.0 - a
    theta = math.radians(a)
    return pan.head_radius_m / pan.speed_of_sound_mps * (theta + math.sin(theta))


def ild_db(azimuth_deg: float, pan: PanSpec = PanSpec()) -> float:
    """Near-minus-far level difference in dB (non-negative)."""
    return pan.ild_max_db * abs(math.sin(math.radians(azimuth_deg)))


def fractional_delay_kernel(frac: float) -> np.ndarray:
    """Kaiser-windowed sinc delaying by ``_FD_CENTER + frac`` samples, unit DC gain."""
    if frac == 0.0:
        h = np.zeros(FRACTIONAL_DELAY_TAPS)
        h[_FD_CENTER] = 1.0
        return h
    t = np.arange(FRACTIONAL_DELAY_TAPS) - _FD_CENTER - frac
    half = FRACTIONAL_DELAY_TAPS / 2.0
    win = np.i0(_FD_KAISER_BETA * np.sqrt(np.clip(1.0 - (t / half) ** 2, 0.0, None)))
    h = np.sinc(t) * win / np.i0(_FD_KAISER_BETA)
    return h / h.sum()


def delay_signal(x: np.ndarray, delay_samples: float) -> np.ndarray:
    """Delay by a non-negative, possibly fractional number of samples, keeping the length."""
    n = x.shape[0]
    whole = int(math.floor(delay_samples))
    frac = delay_samples - whole
    y = np.convolve(x, fractional_delay_kernel(frac))[_FD_CENTER:_FD_CENTER + n]
    if whole:
        y = np.concatenate([np.zeros(min(whole, n)), y[:max(n - whole, 0)]])
    return y


def pan_binaural(mono: AudioBuffer, pan: PanSpec) -> AudioBuffer:
    """Place a mono source at ``pan.azimuth_deg`` using ITD on the far ear and a broadband ILD."""
    if mono.channel_count != 1:
        raise InvalidSpec(f"pan_binaural expects mono input, got {mono.channel_count} channels")
    x = mono.channel(0)
    delay = itd_seconds(pan.azimuth_deg, pan) * mono.sample_rate_hz
    half_ild = ild_db(pan.azimuth_deg, pan) / 2.0
    near = x * 10.0 ** (half_ild / 20.0)
    far = delay_signal(x, delay) * 10.0 ** (-half_ild / 20.0)
    left, right = (near, far) if pan.azimuth_deg >= 0 else (far, near)
    return AudioBuffer(np.stack([left, right]), mono.sample_rate_hz)


@dataclass(frozen=True)
class AdditiveNoise:
    snr_db: float
    seed: int = 0

    def tag(self) -> str:
        return f"snr{_num_tag(self.snr_db)}"


@dataclass(frozen=True)
class Lowpass:
    cutoff_hz: float

    def tag(self) -> str:
        return f"lp{_num_tag(self.cutoff_hz)}"


@dataclass(frozen=True)
class Quantize:
    bits: int

    def tag(self) -> str:
        return f"q{self.bits}"


Degradation = Union[AdditiveNoise, Lowpass, Quantize]


def degradation_from_dict(d: dict) -> Degradation:
    d = dict(d)
    op = d.pop("op", None)
    try:
        if op == "additive_noise":
            snr = d.pop("snr_db")
            snr = math.inf if snr in ("inf", "Infinity", None) else float(snr)
            return AdditiveNoise(snr, int(d.pop("seed", 0)))
        if op == "lowpass":
            return Lowpass(float(d.pop("cutoff_hz")))
        if op == "quantize":
            return Quantize(int(d.pop("bits")))
    except KeyError as exc:
        raise InvalidSpec(f"degradation {op!r} missing field {exc}") from None
    raise InvalidSpec(f"unknown degradation op {op!r}")


def degrade(stereo: AudioBuffer, op: Degradation) -> AudioBuffer:
    """Apply one degradation identically to every channel."""
    x = stereo.samples
    fs = stereo.sample_rate_hz
    if isinstance(op, AdditiveNoise):
        if math.isinf(op.snr_db) and op.snr_db > 0:
            return stereo
        noise = np.random.default_rng(op.seed).standard_normal(x.shape)
        sig_energy = float(np.sum(x * x))
        gain = math.sqrt(sig_energy / (float(np.sum(noise * noise)) * 10.0 ** (op.snr_db / 10.0)))
        return AudioBuffer(x + gain * noise, fs)
    if isinstance(op, Lowpass):
        if not 0 < op.cutoff_hz < fs / 2:
            raise InvalidSpec(f"lowpass cutoff {op.cutoff_hz} Hz outside (0, {fs / 2})")
        sos = sps.butter(4, op.cutoff_hz, btype="low", fs=fs, output="sos")
        return AudioBuffer(sps.sosfilt(sos, x, axis=1), fs)
    if isinstance(op, Quantize):
        if op.bits < 2:
            raise InvalidSpec("quantize needs at least 2 bits")
        scale = float(2 ** (op.bits - 1))
        return AudioBuffer(np.clip(np.round(x * scale), -scale, scale - 1) / scale, fs)
    raise InvalidSpec(f"unsupported degradation {op!r}")


def _num_tag(v: float) -> str:
    if math.isinf(v):
        return "inf"
    return str(int(v)) if float(v).is_integer() else str(v).replace(".", "p").replace("-", "m")


def azimuth_tag(az: float) -> str:
    sign = "m" if az < 0 else "p"
    mag = abs(az)
    body = f"{int(mag):03d}" if float(mag).is_integer() else str(mag).replace(".", "p")
    return f"az{sign}{body}"


@dataclass(frozen=True)
class FixtureSet:
    """A grid of stimuli x azimuths (x optional degradations) from a JSON manifest."""

    stimuli: tuple[tuple[str, StimulusSpec], ...]
    azimuths_deg: tuple[float, ...]
    pan: PanSpec = field(default_factory=PanSpec)
    degradations: tuple[Degradation, ...] = ()
    sample_rate_hz: int = 48000
    bit_depth: str = "16"

    @classmethod
    def from_dict(cls, d: dict) -> "FixtureSet":
        if not isinstance(d, dict):
            raise InvalidSpec("fixture manifest must be a JSON object")
        if d.get("schema_version", 1) != 1:
            raise InvalidSpec(f"unsupported schema_version {d.get('schema_version')!r}")
        raw_stimuli = d.get("stimuli")
        if not raw_stimuli:
            raise InvalidSpec("fixture manifest needs a non-empty 'stimuli' list")
        stimuli = []
        for i, s in enumerate(raw_stimuli):
            if not isinstance(s, dict) or "kind" not in s:
                raise InvalidSpec(f"stimulus {i} must be an object with a 'kind'")
            name = str(s.get("name", s["kind"]))
            stimuli.append((name, StimulusSpec.from_dict(s)))
        names = [n for n, _ in stimuli]
        if len(set(names)) != len(names):
            raise InvalidSpec("stimulus names must be unique")
        pan_kw = dict(d.get("pan", {}))
        pan_kw.pop("azimuth_deg", None)
        try:
            azimuths = tuple(float(a) for a in d.get("azimuths_deg", [0.0]))
            pan = PanSpec(**pan_kw)
            for a in azimuths:
                PanSpec(azimuth_deg=a)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from None
        degs = tuple(degradation_from_dict(x) for x in d.get("degradations", []))
        bit_depth = str(d.get("bit_depth", "16"))
        if bit_depth not in ("16", "24", "32f"):
            raise InvalidSpec(f"bit_depth must be 16, 24 or 32f, got {bit_depth!r}")
        return cls(tuple(stimuli), azimuths, pan, degs, int(d.get("sample_rate_hz", 48000)), bit_depth)

    def render(self):
        """Yield ``(file_stem, seed, stereo_buffer)`` in a fixed order."""
        for name, spec in self.stimuli:
            mono = generate(spec, self.sample_rate_hz)
            for az in self.azimuths_deg:
                pan = PanSpec(az, self.pan.head_radius_m, self.pan.speed_of_sound_mps, self.pan.ild_max_db)
                stereo = pan_binaural(mono, pan)
                stem = f"{name}_{azimuth_tag(az)}"
                yield stem, spec.seed, stereo
                for deg in self.degradations:
                    yield f"{stem}_{deg.tag()}", spec.seed, degrade(stereo, deg)
