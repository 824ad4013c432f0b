import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from binaqual.bands import build_band_map
from binaqual.errors import DimensionMismatch, TooShort
from binaqual.nsim import (
    AlignmentPolicy,
    NsimParams,
    band_average,
    channel_nsim,
    gaussian_kernel,
    nsim_map,
    segment_patches,
)
from binaqual.spectral import stft_phase

from oracles import fraction_band_average, hand_nsim

BAND_MAP = build_band_map()


def test_params_defaults():
    p = NsimParams()
    assert p.c1 == pytest.approx((0.02 * math.pi) ** 2)
    assert p.c3 == pytest.approx((0.06 * math.pi) ** 2 / 2)
    assert abs(p.kernel.sum() - 1.0) < 1e-12
    assert p.kernel.shape == (3, 3)


def test_kernel_values():
    k = gaussian_kernel(3, 0.5)
    e1, e2 = math.exp(-2), math.exp(-4)
    total = 1 + 4 * e1 + 4 * e2
    assert k[1, 1] == pytest.approx(1 / total, abs=1e-15)
    assert k[0, 1] == pytest.approx(e1 / total, abs=1e-15)
    assert k[0, 0] == pytest.approx(e2 / total, abs=1e-15)


def test_segment_counts():
    assert len(segment_patches(np.zeros((640, 124)))) == 4
    patches = segment_patches(np.zeros((640, 30)))
    assert len(patches) == 1 and patches[0].start_frame == 0
    assert [p.start_frame for p in segment_patches(np.zeros((640, 124)))] == [0, 30, 60, 90]
    with pytest.raises(TooShort):
        segment_patches(np.zeros((640, 29)))


def test_identical_patches_map_is_one(rng):
    p = rng.uniform(-math.pi, math.pi, (640, 30))
    assert np.max(np.abs(nsim_map(p, p) - 1.0)) < 1e-12


def test_constant_pi_vs_zero():
    c1 = (0.01 * 2 * math.pi) ** 2
    expected = c1 / (math.pi ** 2 + c1)
    m = nsim_map(np.full((640, 30), math.pi), np.zeros((640, 30)))
    np.testing.assert_allclose(m, expected, rtol=1e-12)
    assert expected == pytest.approx(3.998e-4, abs=1e-6)


def test_sign_flip_lowers_luminance(rng):
    from binaqual.nsim import local_stats
    p = rng.uniform(-math.pi, math.pi, (20, 30))
    mu_r, mu_t, *_ = local_stats(p, -p, NsimParams().kernel)
    c1 = NsimParams().c1
    lum = (2 * mu_r * mu_t + c1) / (mu_r ** 2 + mu_t ** 2 + c1)
    nonzero = np.abs(mu_r) > 1e-9
    assert np.all(lum[nonzero] < 1.0)


def test_nsim_map_matches_hand_rolled(rng):
    ref = rng.uniform(-math.pi, math.pi, (9, 9))
    test = ref + rng.normal(0, 0.7, (9, 9))
    p = NsimParams()
    oracle = hand_nsim(ref.tolist(), test.tolist(), p.c1, p.c3)
    assert np.max(np.abs(nsim_map(ref, test, p) - oracle)) < 1e-12


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        nsim_map(np.zeros((640, 30)), np.zeros((640, 29)))


def test_band_average_trivial():
    np.testing.assert_array_equal(band_average(np.ones((640, 30)), BAND_MAP), np.ones(32))
    m = np.zeros((640, 30))
    m[BAND_MAP.band_of_bin == 0] = 0.625
    out = band_average(m, BAND_MAP)
    assert out[0] == 0.625 and not out[1:].any()


def test_band_average_matches_double_loop(rng):
    m = rng.uniform(-1, 1, (640, 30))
    oracle = fraction_band_average(m, BAND_MAP.band_of_bin.tolist(), 32)
    assert band_average(m, BAND_MAP).tolist() == oracle


def test_band_average_rejects_wrong_rows():
    with pytest.raises(DimensionMismatch):
        band_average(np.zeros((600, 30)), BAND_MAP)


def _phaseogram(x):
    return stft_phase(x)


def test_channel_identity(rng):
    ph = _phaseogram(rng.standard_normal(96000))
    score = channel_nsim(ph, ph, BAND_MAP)
    assert score.nsim == 1.0
    assert abs(score.raw_nsim - 1.0) < 1e-12
    assert score.n_patches == 4


def test_channel_tiny_perturbation(rng):
    x = rng.uniform(-0.5, 0.5, 96000)
    y = x + rng.uniform(-1e-6, 1e-6, 96000)
    assert channel_nsim(_phaseogram(x), _phaseogram(y), BAND_MAP).nsim >= 0.99


def test_channel_symmetry(rng):
    a = _phaseogram(rng.standard_normal(96000))
    b = _phaseogram(rng.standard_normal(96000))
    assert channel_nsim(a, b, BAND_MAP).raw_nsim == channel_nsim(b, a, BAND_MAP).raw_nsim


def test_aggregation_consistency(rng):
    from binaqual.nsim import fmean
    x = rng.standard_normal(96000)
    a = _phaseogram(x)
    b = _phaseogram(x + 0.3 * rng.standard_normal(96000))
    s = channel_nsim(a, b, BAND_MAP)
    assert s.raw_nsim == fmean(s.patch_scores)
    for ps, bands in zip(s.patch_scores, s.band_scores):
        assert len(bands) == 32
        assert ps == fmean(bands)
    assert s.nsim == min(max(s.raw_nsim, 0.0), 1.0)
    assert all(-1.0 <= v <= 1.0 for bands in s.band_scores for v in bands)


def test_clamp_at_zero():
    # anti-correlated phase images drive the structure term negative
    ramp = np.tile(np.linspace(-3, 3, 640)[:, None], (1, 30))
    s = channel_nsim(ramp, -ramp, BAND_MAP)
    assert s.raw_nsim < 0 and s.nsim == 0.0


def test_too_short_propagates():
    with pytest.raises(TooShort):
        channel_nsim(np.zeros((640, 20)), np.zeros((640, 20)), BAND_MAP)


def test_alignment_search_recovers_frame_delay(rng):
    x = rng.standard_normal(48000 * 3)
    delayed = np.concatenate([np.zeros(768 * 2), x[:-768 * 2]])
    ref, test = _phaseogram(x), _phaseogram(delayed)
    plain = channel_nsim(ref, test, BAND_MAP)
    searched = channel_nsim(ref, test, BAND_MAP, alignment=AlignmentPolicy(3))
    assert searched.nsim > plain.nsim
    assert set(searched.offsets[1:]) == {2}


def test_alignment_zero_search_equals_default(rng):
    a = _phaseogram(rng.standard_normal(60000))
    b = _phaseogram(rng.standard_normal(60000))
    assert channel_nsim(a, b, BAND_MAP, alignment=AlignmentPolicy(0)) == channel_nsim(a, b, BAND_MAP)


phase_patches = hnp.arrays(np.float64, (12, 30), elements=st.floats(-math.pi, math.pi))


@settings(max_examples=40, deadline=None)
@given(phase_patches, phase_patches)
def test_map_symmetric_and_bounded(a, b):
    m1, m2 = nsim_map(a, b), nsim_map(b, a)
    np.testing.assert_array_equal(m1, m2)
    assert np.all(m1 <= 1.0 + 1e-12) and np.all(m1 >= -1.0 - 1e-12)
