import math

import numpy as np
import pytest

from scripts.errors import InsufficientSamplesError, InvalidParameterError, NonFiniteError
from scripts.metrics import (
    CcdfMode,
    air,
    ccdf,
    delta_psnr_star,
    gaussian_ccdf,
    loss_from_psnr_shift,
    ngmi_estimate,
    ngmi_quadrature,
    noise_variance,
    papr_at_clip,
    papr_deterministic,
    psnr_from_snr,
    psnr_shift_from_loss,
    snr_from_psnr,
)
from scripts.seeding import make_rng
from scripts.source import sample_symbols, shaped_source

from conftest import FAST_N

UNIFORM8_PAPR_DB = 10 * math.log10(49 / 21)


class TestPapr:
    def test_nrz_is_zero_db(self):
        assert papr_deterministic(shaped_source("uniform", 2)).papr_db == pytest.approx(0.0, abs=1e-12)

    def test_uniform_pam8(self, uniform8):
        report = papr_deterministic(uniform8)
        assert report.papr_db == pytest.approx(UNIFORM8_PAPR_DB)
        assert report.clip_ratio == 0.0

    def test_mb_gap_to_uniform(self, uniform8, mb8_22):
        gap = papr_deterministic(mb8_22).papr_db - papr_deterministic(uniform8).papr_db
        assert gap == pytest.approx(6.3, abs=0.2)

    def test_papr_independent_of_scale(self, mb8_22):
        assert papr_deterministic(mb8_22.with_scale(3.7)).papr_db == pytest.approx(papr_deterministic(mb8_22).papr_db)

    def test_exact_clip_of_unfiltered_is_true_peak(self, uniform8):
        assert papr_at_clip(uniform8, 1e-5).papr_db == pytest.approx(UNIFORM8_PAPR_DB)

    def test_exact_clip_skips_rare_outer_levels(self):
        # outer pair of MB H=1.3 carries far less than 10 % of the mass
        source = shaped_source("mb", 8, 1.3)
        outer = source.probabilities[0] + source.probabilities[-1]
        assert outer < 0.1
        assert papr_at_clip(source, 0.1).clip_power < 49

    @pytest.mark.parametrize("clip_ratio", [0.0, 0.2, 1.0])
    def test_clip_ratio_domain(self, uniform8, clip_ratio):
        with pytest.raises(InvalidParameterError):
            papr_at_clip(uniform8, clip_ratio)

    def test_empirical_needs_enough_samples(self):
        with pytest.raises(InsufficientSamplesError) as info:
            papr_at_clip(np.ones(1000), 1e-3)
        assert info.value.need == 100_000

    def test_empirical_order_statistic(self):
        n = 10_000
        samples = np.sqrt(np.arange(1, n + 1, dtype=float))
        report = papr_at_clip(samples, 0.01)
        assert report.clip_power == pytest.approx(9900.0)
        assert report.mean_power == pytest.approx((n + 1) / 2)

    def test_non_increasing_in_clip_ratio(self):
        x = make_rng(9).standard_normal(200_000)
        paprs = [papr_at_clip(x, eps).papr_db for eps in (1e-3, 3e-3, 1e-2, 3e-2, 1e-1)]
        assert np.all(np.diff(paprs) <= 0)


class TestCcdf:
    def test_uniform_pam8_exact(self, uniform8):
        table = ccdf(uniform8)
        assert table.mode is CcdfMode.EXACT
        assert table.at(25) == pytest.approx(0.5)
        assert table.at(0) == pytest.approx(1.0)
        assert table.at(50) == 0.0

    def test_empirical_monotone(self):
        x = make_rng(3).standard_normal(50_000)
        table = ccdf(x)
        assert table.mode is CcdfMode.EMPIRICAL
        assert np.all(np.diff(table.probabilities) <= 0)
        assert np.all((table.probabilities >= 0) & (table.probabilities <= 1))
        assert table.at(0) == 1.0

    def test_empirical_matches_exact_on_symbols(self, mb8_22):
        n = 200_000
        stream = sample_symbols(mb8_22, n, seed=17)
        empirical = ccdf(mb8_22.levels[stream.indices], thresholds=[1, 9, 25, 49])
        exact = ccdf(mb8_22, thresholds=[1, 9, 25, 49])
        sigma = np.sqrt(exact.probabilities * (1 - exact.probabilities) / n)
        assert np.all(np.abs(empirical.probabilities - exact.probabilities) <= 5 * sigma + 1e-12)

    def test_min_clip_ratio_checks_sample_count(self):
        with pytest.raises(InsufficientSamplesError):
            ccdf(np.ones(500), min_clip_ratio=1e-3)

    def test_frame_columns(self, uniform8):
        frame = ccdf(uniform8).to_frame()
        assert list(frame.columns) == ["power", "power_db", "ccdf"]
        assert frame["power_db"].iloc[-1] == pytest.approx(UNIFORM8_PAPR_DB)

    def test_gaussian_reference(self):
        assert gaussian_ccdf([0.0], 1.0)[0] == pytest.approx(1.0)
        assert gaussian_ccdf([1.0], 1.0)[0] == pytest.approx(0.31731, abs=1e-5)


class TestConversions:
    def test_snr_from_psnr(self):
        assert snr_from_psnr(15, 3.68) == pytest.approx(11.32)
        assert snr_from_psnr(12.5, 0.0) == 12.5

    def test_round_trip(self):
        for psnr, papr in [(15, 3.68), (-3.2, 9.1), (27.25, 0.0)]:
            assert psnr_from_snr(snr_from_psnr(psnr, papr), papr) == pytest.approx(psnr, abs=1e-12)

    @pytest.mark.parametrize("loss,shift", [(3, -6), (0, 0), (-1.65, 3.3)])
    def test_psnr_shift_from_loss(self, loss, shift):
        assert psnr_shift_from_loss(loss) == pytest.approx(shift)
        assert loss_from_psnr_shift(shift) == pytest.approx(loss)

    def test_signal_dependent_noise_factor(self):
        assert loss_from_psnr_shift(3.3, factor=1.5) == pytest.approx(-2.2)
        with pytest.raises(InvalidParameterError):
            loss_from_psnr_shift(3.3, factor=0)

    @pytest.mark.parametrize("papr,snr,expected", [(0, 6.2, 6.2), (2.9, -6.2, -3.3), (1.7, 0, 1.7)])
    def test_delta_psnr_star(self, papr, snr, expected):
        assert delta_psnr_star(papr, snr) == pytest.approx(expected)


class TestAir:
    @pytest.mark.parametrize("rate,order,expected", [(2.2, 8, 1.6), (2.0, 4, 1.6), (3.0, 8, 2.4)])
    def test_fixed_rate_fec(self, rate, order, expected):
        assert air(rate, 0.8, order) == pytest.approx(expected)

    def test_shaping_rate_loss(self):
        assert air(2.2, 0.8, 8, shaping_rate_loss=0.1) == pytest.approx(1.5)

    @pytest.mark.parametrize("args", [(2.0, 0.0, 4), (2.0, 1.2, 4), (3.5, 0.8, 8), (2.0, 0.8, 6)])
    def test_domain(self, args):
        with pytest.raises(InvalidParameterError):
            air(*args)


class TestNgmi:
    def test_noise_variance(self, uniform8):
        assert noise_variance(uniform8, 10.0) == pytest.approx(2.1)

    def test_non_finite_variance(self, uniform8):
        with pytest.raises(NonFiniteError):
            noise_variance(uniform8, 1e4)

    def test_too_few_samples(self, uniform8):
        with pytest.raises(InvalidParameterError):
            ngmi_estimate(uniform8, 10.0, 5000, seed=1)

    def test_noiseless_limit(self, mb8_22):
        est = ngmi_estimate(mb8_22, 60.0, FAST_N, seed=2)
        assert est.ngmi == pytest.approx(1.0, abs=1e-3)

    def test_fields_are_consistent(self, mb8_22):
        est = ngmi_estimate(mb8_22, 12.0, FAST_N, seed=3)
        assert est.ngmi == pytest.approx(1 - (est.entropy - est.gmi) / 3, abs=1e-12)
        assert est.gmi <= est.entropy + 3 * est.gmi_stderr
        assert est.sample_count == FAST_N
        assert est.gmi_stderr > 0

    def test_deterministic(self, mb8_22):
        a = ngmi_estimate(mb8_22, 8.0, FAST_N, seed=4)
        b = ngmi_estimate(mb8_22, 8.0, FAST_N, seed=4)
        assert a == b

    def test_increasing_in_snr(self, uniform8):
        values = [ngmi_estimate(uniform8, snr, FAST_N, seed=5, resamples=0).ngmi for snr in (0, 5, 10, 15, 20)]
        assert np.all(np.diff(values) > 0)

    def test_lower_entropy_higher_ngmi(self):
        low = ngmi_estimate(shaped_source("mb", 8, 2.2), 10.0, FAST_N, seed=6, resamples=0)
        high = ngmi_estimate(shaped_source("mb", 8, 2.8), 10.0, FAST_N, seed=6, resamples=0)
        assert low.ngmi > high.ngmi

    @pytest.mark.parametrize("order", [2, 4])
    @pytest.mark.parametrize("snr_db", [5.0, 10.0, 15.0])
    def test_matches_quadrature(self, order, snr_db):
        source = shaped_source("uniform", order)
        oracle = ngmi_quadrature(source, snr_db)
        est = ngmi_estimate(source, snr_db, 200_000, seed=20210601, resamples=0)
        assert est.ngmi == pytest.approx(oracle.ngmi, abs=0.005)

    def test_quadrature_noiseless_limit(self, mb8_22):
        assert ngmi_quadrature(mb8_22, 60.0).ngmi == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.slow
    def test_matches_quadrature_shaped(self, mb8_22):
        oracle = ngmi_quadrature(mb8_22, 12.0)
        est = ngmi_estimate(mb8_22, 12.0, 1_000_000, seed=7, resamples=0)
        assert est.ngmi == pytest.approx(oracle.ngmi, abs=0.003)
