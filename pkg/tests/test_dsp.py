import math

import numpy as np
import pytest

from scripts.channel import calibration_waveform
from scripts.dsp import (
    PulseShaper,
    ShaperKind,
    TiltEdge,
    excess_kurtosis,
    filter_power_gain,
    matched_filter,
    no_shaper,
    pre_emphasis,
    rc_taps,
    rrc_taps,
    shape_waveform,
    waveform_histogram,
)
from scripts.errors import InvalidParameterError, TooFewSymbolsError
from scripts.metrics import papr_at_clip, papr_deterministic
from scripts.seeding import make_rng
from scripts.source import average_energy, sample_symbols


class TestShaper:
    def test_label(self):
        assert no_shaper().label == "no filter"
        assert PulseShaper(ShaperKind.RRC, 0.2, tilt_db=3).label == "RRC ρ=0.2 + 3 dB tilt"
        band = PulseShaper(ShaperKind.RRC, 0.2, tilt_db=3, tilt_edge="band")
        assert band.label == "RRC ρ=0.2 + 3 dB tilt (band edge)"
        assert band.to_dict()["tilt_edge"] == "band"

    def test_tilt_reaches_sampling_nyquist_by_default(self):
        shaper = PulseShaper(ShaperKind.RRC, 0.05, span=16, oversampling=16, tilt_db=8)
        assert shaper.tilt_edge is TiltEdge.NYQUIST
        assert shaper.tilt_edge_frequency == 0.5
        assert PulseShaper(ShaperKind.RRC, 0.05, span=16, oversampling=16, tilt_db=8, tilt_edge="band").tilt_edge_frequency == pytest.approx(1.05 / 32)

    @pytest.mark.parametrize("kwargs", [
        {"kind": "rrc", "rolloff": 0.0},
        {"kind": "rrc", "rolloff": 1.2},
        {"kind": "rc", "rolloff": 0.5, "span": 7},
        {"kind": "rc", "rolloff": 0.5, "span": 4},
        {"kind": "rrc", "rolloff": 0.5, "oversampling": 1},
        {"kind": "rrc", "rolloff": 0.5, "tilt_db": -1},
        {"kind": "none", "tilt_db": 3},
        {"kind": "gaussian"},
        {"kind": "rrc", "rolloff": 0.5, "tilt_db": 3, "tilt_edge": "dc"},
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(InvalidParameterError):
            PulseShaper(**kwargs)


class TestTaps:
    @pytest.mark.parametrize("rolloff", [0.01, 0.05, 0.2, 0.25, 0.5, 1.0])
    def test_rrc_symmetric_unit_energy(self, rolloff):
        h = rrc_taps(rolloff, 64, 16)
        assert len(h) == 64 * 16 + 1
        assert np.allclose(h, h[::-1], atol=1e-14)
        assert np.sum(h * h) == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.isfinite(h))

    @pytest.mark.parametrize("rolloff", [0.35, 1.0])
    def test_rrc_pair_is_nyquist(self, rolloff):
        span, L = 64, 8
        h = rrc_taps(rolloff, span, L)
        pair = np.convolve(h, h)
        center = span * L
        at_symbols = pair[center % L::L]
        k0 = center // L
        assert at_symbols[k0] == pytest.approx(1.0, abs=1e-3)
        assert np.max(np.abs(np.delete(at_symbols, k0))) < 1e-3

    @pytest.mark.parametrize("rolloff", [0.25, 0.5, 1.0])
    def test_rc_zero_crossings(self, rolloff):
        span, L = 16, 8
        h = rc_taps(rolloff, span, L)
        at_symbols = h[::L]
        assert at_symbols[span // 2] == pytest.approx(1.0)
        assert np.max(np.abs(np.delete(at_symbols, span // 2))) <= 1e-12
        assert np.argmax(h) == len(h) // 2


class TestPreEmphasis:
    def test_zero_tilt_is_identity(self):
        x = make_rng(1).standard_normal(4096)
        assert np.allclose(pre_emphasis(x, 0.0), x, atol=1e-10)

    def test_power_preserved(self):
        x = make_rng(2).standard_normal(4096)
        y = pre_emphasis(x, 8.0)
        assert np.mean(y * y) == pytest.approx(np.mean(x * x), rel=1e-9)
        assert not np.allclose(x, y)

    def test_negative_tilt(self):
        with pytest.raises(InvalidParameterError):
            pre_emphasis(np.ones(8), -1.0)

    @staticmethod
    def gain_db(y: np.ndarray) -> np.ndarray:
        """Gain relative to DC of a filtered unit impulse."""
        spectrum = np.abs(np.fft.rfft(y))
        return 20 * np.log10(spectrum / spectrum[0])

    def test_gain_linear_up_to_sampling_nyquist(self):
        impulse = np.zeros(1024)
        impulse[0] = 1.0
        gain = self.gain_db(pre_emphasis(impulse, 8.0))
        # bins 32, 256, 512 are 0.03125, 0.25, 0.5 cycles/sample
        assert gain[32] == pytest.approx(0.5, abs=1e-6)
        assert gain[256] == pytest.approx(4.0, abs=1e-6)
        assert gain[512] == pytest.approx(8.0, abs=1e-6)
        assert np.all(np.diff(gain) > 0)

    def test_gain_held_above_band_edge(self):
        impulse = np.zeros(1024)
        impulse[0] = 1.0
        gain = self.gain_db(pre_emphasis(impulse, 8.0, edge=0.125))
        assert gain[64] == pytest.approx(4.0, abs=1e-6)
        assert np.allclose(gain[128:], 8.0, atol=1e-6)

    @pytest.mark.parametrize("edge", ["nyquist", "band"])
    def test_shaper_applies_its_tilt_edge(self, uniform8, edge):
        plain = PulseShaper(ShaperKind.RRC, 0.05, span=16, oversampling=16)
        tilted = PulseShaper(ShaperKind.RRC, 0.05, span=16, oversampling=16, tilt_db=8.0, tilt_edge=edge)
        stream = sample_symbols(uniform8, 400, seed=12)
        base = shape_waveform(stream.indices, uniform8.levels, plain)
        w = shape_waveform(stream.indices, uniform8.levels, tilted)
        expected = pre_emphasis(base.samples, 8.0, edge=0.5 if edge == "nyquist" else 1.05 / 32)
        assert np.allclose(w.samples, expected, atol=1e-12)

    @pytest.mark.slow
    def test_tilt_raises_clip_papr(self, uniform8):
        plain = PulseShaper(ShaperKind.RRC, 0.05, span=64, oversampling=2)
        tilted = PulseShaper(ShaperKind.RRC, 0.05, span=64, oversampling=2, tilt_db=8.0)
        a = papr_at_clip(calibration_waveform(uniform8, plain, 1_000_000, 5), 1e-4).papr_db
        b = papr_at_clip(calibration_waveform(uniform8, tilted, 1_000_000, 5), 1e-4).papr_db
        assert b > a


class TestShapeWaveform:
    def test_unfiltered_is_impulse_train(self, uniform8):
        stream = sample_symbols(uniform8, 200, seed=4)
        w = shape_waveform(stream.indices, uniform8.levels, no_shaper(4))
        assert len(w) == 200 * 4
        assert np.array_equal(w.active_samples, uniform8.levels[stream.indices])
        assert np.all(w.samples.reshape(-1, 4)[:, 1:] == 0)

    def test_trimmed_length_and_alignment(self, uniform8, short_rrc):
        stream = sample_symbols(uniform8, 400, seed=5)
        w = shape_waveform(stream.indices, uniform8.levels, short_rrc)
        assert len(w) == (400 - short_rrc.span) * short_rrc.oversampling
        assert w.first_symbol == short_rrc.span // 2
        assert not w.samples.flags.writeable

    def test_too_few_symbols(self, uniform8, short_rrc):
        with pytest.raises(TooFewSymbolsError):
            shape_waveform(np.zeros(4 * short_rrc.span - 1, dtype=int), uniform8.levels, short_rrc)

    def test_deterministic(self, mb8_22, short_rrc):
        stream = sample_symbols(mb8_22, 500, seed=6)
        a = shape_waveform(stream.indices, mb8_22.levels, short_rrc)
        b = shape_waveform(stream.indices, mb8_22.levels, short_rrc)
        assert np.array_equal(a.samples, b.samples)

    def test_single_impulse_energy(self):
        shaper = PulseShaper(ShaperKind.RRC, 0.3, span=16, oversampling=8)
        symbols = np.zeros(200, dtype=int)
        symbols[100] = 1
        w = shape_waveform(symbols, np.array([0.0, 3.0]), shaper, trim=False)
        assert np.sum(w.samples ** 2) == pytest.approx(9.0, rel=1e-6)

    def test_block_power_follows_filter_gain(self, uniform8, short_rrc):
        stream = sample_symbols(uniform8, 40_000, seed=7)
        w = shape_waveform(stream.indices, uniform8.levels, short_rrc)
        expected = average_energy(uniform8) * filter_power_gain(short_rrc)
        assert w.mean_power == pytest.approx(expected, rel=2e-2)


class TestMatchedFilter:
    @pytest.mark.parametrize("rolloff", [0.35, 1.0])
    def test_zero_isi_loopback(self, uniform8, rolloff):
        shaper = PulseShaper(ShaperKind.RRC, rolloff, span=64, oversampling=8)
        stream = sample_symbols(uniform8, 3000, seed=8)
        w = shape_waveform(stream.indices, uniform8.levels, shaper)
        out = matched_filter(w)
        assert out.phase == 0
        sent = uniform8.levels[stream.indices][out.first_symbol: out.first_symbol + len(out.values)]
        rel_rms = np.sqrt(np.mean((out.values - sent) ** 2) / np.mean(sent ** 2))
        assert rel_rms < 1e-3

    @pytest.mark.parametrize("family_fixture", ["uniform8", "mb8_22"])
    def test_full_rolloff_rc_at_two_samples_keeps_the_peak(self, family_fixture, request):
        source = request.getfixturevalue(family_fixture)
        shaper = PulseShaper(ShaperKind.RC, 1.0, span=16, oversampling=2)
        w = calibration_waveform(source, shaper, 400_000, 5)
        shift = papr_at_clip(w, 1e-3).papr_db - papr_deterministic(source).papr_db
        # midpoints average their neighbours: only the mean power drops, to 1 - ρ/4
        assert shift == pytest.approx(10 * math.log10(1 / 0.75), abs=0.05)

    def test_rc_has_no_matched_filter(self, uniform8):
        shaper = PulseShaper(ShaperKind.RC, 1.0, span=16, oversampling=4)
        w = shape_waveform(sample_symbols(uniform8, 200, seed=9).indices, uniform8.levels, shaper)
        with pytest.raises(InvalidParameterError):
            matched_filter(w)


class TestGaussianization:
    @pytest.mark.parametrize("family_fixture", ["uniform8", "mb8_22"])
    def test_small_rolloff_is_closer_to_gaussian(self, family_fixture, request):
        source = request.getfixturevalue(family_fixture)
        narrow = PulseShaper(ShaperKind.RRC, 0.01, span=64, oversampling=8)
        wide = PulseShaper(ShaperKind.RRC, 0.4, span=64, oversampling=8)
        k_narrow = excess_kurtosis(calibration_waveform(source, narrow, 400_000, 3))
        k_wide = excess_kurtosis(calibration_waveform(source, wide, 400_000, 3))
        assert abs(k_narrow) < abs(k_wide)

    def test_histogram_is_a_density(self, uniform8, short_rrc):
        w = calibration_waveform(uniform8, short_rrc, 100_000, 1)
        table = waveform_histogram(w, bins=161)
        assert list(table.columns) == ["amplitude", "density", "gaussian_density"]
        width = table["amplitude"].diff().iloc[1]
        assert (table["density"].sum() * width) == pytest.approx(1.0, abs=1e-2)
