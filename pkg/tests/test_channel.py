import math

import numpy as np
import pytest

from scripts.channel import (
    ChannelSpec,
    Constraint,
    QualityMetric,
    clip_papr,
    constraint_papr,
    normalize_apc,
    normalize_ppc,
    normalize_ppc_clip,
    resolve_snr,
    scale_to_constraint,
    transmit_awgn,
)
from scripts.dsp import PulseShaper, ShaperKind, no_shaper
from scripts.errors import InconsistentSpecError, InsufficientSamplesError, InvalidParameterError
from scripts.metrics import papr_deterministic
from scripts.source import average_energy, shaped_source

from conftest import FAST_CALIBRATION, FAST_CLIP, FAST_N


class TestNormalizeApc:
    def test_uniform_pam8_at_its_energy(self, uniform8):
        assert normalize_apc(uniform8, 21.0) == pytest.approx(1.0)

    def test_mb_gets_larger_scale(self, uniform8, mb8_22):
        assert normalize_apc(mb8_22, 1.0) > normalize_apc(uniform8, 1.0)

    def test_power_quadruples_scale_doubles(self, mb8_22):
        assert normalize_apc(mb8_22, 4.0) == pytest.approx(2 * normalize_apc(mb8_22, 1.0))


class TestNormalizePpc:
    def test_bipolar_peak(self, uniform8):
        assert normalize_ppc(uniform8, 49.0) == pytest.approx(1.0)

    def test_independent_of_distribution(self, uniform8, mb8_22):
        assert normalize_ppc(mb8_22, 3.0) == pytest.approx(normalize_ppc(uniform8, 3.0))

    def test_unipolar_peak(self):
        assert normalize_ppc(shaped_source("as-mb", 8, 2.4, bias=7), 196.0) == pytest.approx(1.0)


class TestNormalizePpcClip:
    def test_unfiltered_reduces_to_ppc(self, uniform8, mb8_22):
        for source in (uniform8, mb8_22):
            clip = normalize_ppc_clip(source, no_shaper(), 49.0, 1e-5, 10_000_000, seed=1)
            assert clip == pytest.approx(normalize_ppc(source, 49.0))

    def test_doubling_peak(self, uniform8, short_rrc):
        a = normalize_ppc_clip(uniform8, short_rrc, 1.0, FAST_CLIP, FAST_CALIBRATION, seed=2)
        b = normalize_ppc_clip(uniform8, short_rrc, 2.0, FAST_CLIP, FAST_CALIBRATION, seed=2)
        assert b == pytest.approx(math.sqrt(2) * a)

    def test_scale_consistent(self, mb8_22, short_rrc):
        delta = normalize_ppc_clip(mb8_22, short_rrc, 1.0, FAST_CLIP, FAST_CALIBRATION, seed=3)
        again = normalize_ppc_clip(mb8_22.with_scale(delta), short_rrc, 1.0, FAST_CLIP, FAST_CALIBRATION, seed=3)
        assert again == pytest.approx(1.0, rel=1e-9)

    def test_insufficient_calibration(self, uniform8, short_rrc):
        with pytest.raises(InsufficientSamplesError):
            clip_papr(uniform8, short_rrc, 1e-3, 50_000, 4)

    @pytest.mark.slow
    def test_narrow_rrc_shrinks_papr_gap(self, uniform8, mb8_22):
        shaper = PulseShaper(ShaperKind.RRC, 0.01, span=64, oversampling=16)
        unfiltered = papr_deterministic(mb8_22).papr_db - papr_deterministic(uniform8).papr_db
        filtered = (
            clip_papr(mb8_22, shaper, 1e-5, 10_000_000, 20210601).papr_db
            - clip_papr(uniform8, shaper, 1e-5, 10_000_000, 20210601).papr_db
        )
        assert unfiltered == pytest.approx(6.3, abs=0.2)
        assert filtered == pytest.approx(2.4, abs=0.3)


class TestChannelSpec:
    def test_quality_follows_constraint(self):
        assert ChannelSpec(Constraint.APC, 10.0).quality is QualityMetric.SNR
        assert ChannelSpec("ppc", 10.0).quality is QualityMetric.PSNR
        assert ChannelSpec("ppc-clip", 10.0, shaper=PulseShaper("rrc", 0.2)).quality is QualityMetric.PSNR

    @pytest.mark.parametrize("kwargs", [
        {"constraint": "apc", "quality": "psnr"},
        {"constraint": "ppc", "quality": "snr"},
        {"constraint": "ppc-clip", "quality": "snr"},
        {"constraint": "ppc", "shaper": PulseShaper(ShaperKind.RRC, 0.2)},
    ])
    def test_inconsistent(self, kwargs):
        with pytest.raises(InconsistentSpecError):
            ChannelSpec(quality_db=10.0, **kwargs)

    @pytest.mark.parametrize("kwargs", [{"power": 0.0}, {"power": -1.0}, {"quality_db": math.inf}])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidParameterError):
            ChannelSpec(**{"constraint": "apc", "quality_db": 10.0, **kwargs})

    def test_resolve_snr_needs_papr_for_psnr(self):
        with pytest.raises(InvalidParameterError):
            resolve_snr(ChannelSpec("ppc", 15.0))
        assert resolve_snr(ChannelSpec("ppc", 15.0), 3.68) == pytest.approx(11.32)


class TestScaling:
    def test_apc_hits_average_power(self, mb8_22):
        scaled = scale_to_constraint(mb8_22, ChannelSpec("apc", 10.0, power=2.5))
        assert average_energy(scaled) == pytest.approx(2.5)

    def test_ppc_hits_peak(self, mb8_22):
        scaled = scale_to_constraint(mb8_22, ChannelSpec("ppc", 10.0, power=2.5))
        assert np.max(scaled.levels ** 2) == pytest.approx(2.5)

    def test_constraint_papr_unfiltered(self, uniform8):
        for constraint in ("ppc", "ppc-clip"):
            report = constraint_papr(uniform8, ChannelSpec(constraint, 10.0))
            assert report.papr_db == pytest.approx(10 * math.log10(49 / 21))


class TestTransmit:
    def test_apc_noise_variance(self, mb8_22):
        tx = transmit_awgn(mb8_22, ChannelSpec("apc", 10.0, seed=5), FAST_N)
        assert tx.noise_variance == pytest.approx(0.1)
        assert tx.snr_db == 10.0

    def test_psnr_maps_through_papr(self, uniform8):
        tx = transmit_awgn(uniform8, ChannelSpec("ppc", 15.0, seed=6), FAST_N)
        papr = 10 * math.log10(49 / 21)
        assert tx.papr_db == pytest.approx(papr)
        assert tx.snr_db == pytest.approx(15.0 - papr)
        assert tx.noise_variance == pytest.approx((21 / 49) / 10 ** ((15.0 - papr) / 10))

    def test_papr_override(self, uniform8):
        tx = transmit_awgn(uniform8, ChannelSpec("ppc", 15.0, seed=6), FAST_N, papr_db=5.0)
        assert tx.snr_db == pytest.approx(10.0)

    def test_same_seed_same_realization(self, mb8_22):
        spec = ChannelSpec("apc", 8.0, seed=7)
        a = transmit_awgn(mb8_22, spec, FAST_N)
        b = transmit_awgn(mb8_22, spec, FAST_N)
        assert np.array_equal(a.received, b.received)
        assert np.array_equal(a.stream.indices, b.stream.indices)

    def test_empirical_noise_power(self, uniform8):
        tx = transmit_awgn(uniform8, ChannelSpec("apc", 5.0, seed=8), 200_000)
        noise = tx.received - tx.source.levels[tx.stream.indices]
        assert np.var(noise) == pytest.approx(tx.noise_variance, rel=2e-2)
