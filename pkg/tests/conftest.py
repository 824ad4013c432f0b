import numpy as np
import pytest

from binaqual.audio_io import AudioBuffer
from binaqual.synthkit import PanSpec, StimulusSpec, generate, pan_binaural

FS = 48000


def noise_stereo(seed: int = 0, seconds: float = 2.0, level: float = 0.5) -> AudioBuffer:
    rng = np.random.default_rng(seed)
    x = rng.uniform(-level, level, size=(2, int(seconds * FS)))
    return AudioBuffer(x, FS)


def panned(kind: str, azimuth: float, seed: int = 1, **kw) -> AudioBuffer:
    return pan_binaural(generate(StimulusSpec(kind, seed=seed, **kw), FS), PanSpec(azimuth))


@pytest.fixture
def stereo_noise():
    return noise_stereo(0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: dict[str, str] = {}


def record_criterion(key: str, ok: bool | None, detail: str) -> None:
    """Store one PASS/FAIL/SKIP line for the acceptance summary and print it."""
    status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    line = f"[{status}] {key}: {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
