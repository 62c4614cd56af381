"""Link-abstraction oracles: path loss, cross-correlation, SINR, chi-squared
detection math, threshold calibration."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from beaconsim import radio
from beaconsim.radio import (ActiveTransmission, ChannelParams, DetectionParams,
                             LinkState, Receiver, SequenceId)

# frozen oracle: hand evaluation of the published UMi street-canyon LoS curve
# 22*log10(32.9) + 28 + 20*log10(3.5) at equal endpoint heights (d3D = 32.9 m)
UMI_LOS_32P9 = 72.25967064190495


def flat_link(shadow=0.0, los=True, h2=1.0):
    return LinkState(los=los, shadow_gain_db=shadow,
                     fast_fading_power=np.array([h2]))


class TestPathLoss:
    def test_monotone_in_distance(self):
        params = ChannelParams()
        link = flat_link()
        d0 = radio.path_loss_db((0, 0), (20, 0), link, params)
        d1 = radio.path_loss_db((0, 0), (40, 0), link, params)
        assert d1 > d0

    def test_umi_los_reference_value(self):
        params = ChannelParams(los_model=radio.LOS_ALWAYS)
        link = flat_link()
        # horizontal offset chosen so the 3-D distance is exactly 32.9 m for
        # the default 10 m / 1.5 m endpoint heights
        d2d = math.sqrt(32.9 ** 2 - 8.5 ** 2)
        pl = radio.path_loss_db((0.0, 0.0), (d2d, 0.0), link, params)
        assert pl == pytest.approx(UMI_LOS_32P9, abs=1e-9)

    def test_radial_symmetry(self):
        params = ChannelParams()
        link = flat_link()
        a = radio.path_loss_db((10.0, 0.0), (0.0, 0.0), link, params)
        b = radio.path_loss_db((-10.0, 0.0), (0.0, 0.0), link, params)
        assert a == b

    def test_zero_distance_rejected(self):
        with pytest.raises(ValueError):
            radio.path_loss_db((5.0, 5.0), (5.0, 5.0), flat_link(), ChannelParams())

    def test_shadow_gain_shifts_loss(self):
        params = ChannelParams()
        base = radio.path_loss_db((0, 0), (20, 0), flat_link(), params)
        shadowed = radio.path_loss_db((0, 0), (20, 0), flat_link(shadow=4.0), params)
        assert shadowed == pytest.approx(base - 4.0)

    def test_nlos_never_below_los(self):
        params = ChannelParams()
        for d in (5.0, 15.0, 40.0, 120.0, 400.0):
            los = radio.path_loss_db((0, 0), (d, 0), flat_link(los=True), params)
            nlos = radio.path_loss_db((0, 0), (d, 0), flat_link(los=False), params)
            assert nlos >= los

    def test_log_distance_model_pluggable(self):
        params = ChannelParams(path_loss_model="log_distance",
                               log_distance_ref_db=40.0, log_distance_exponent=2.0)
        pl = radio.path_loss_db((0, 0), (100.0, 0), flat_link(), params,
                                h_tx=1.5, h_rx=1.5)
        assert pl == pytest.approx(40.0 + 20.0 * math.log10(100.0))


class TestCrossCorrelation:
    def test_same_root_same_shift(self):
        assert radio.cross_correlation(SequenceId(2, 1), SequenceId(2, 1), 7) == 1.0

    def test_same_root_other_shift(self):
        assert radio.cross_correlation(SequenceId(2, 0), SequenceId(2, 1), 7) == 0.0

    def test_different_roots(self):
        rho = radio.cross_correlation(SequenceId(1, 0), SequenceId(3, 1), 7)
        assert rho == pytest.approx(1.0 / math.sqrt(7.0))
        assert rho == pytest.approx(0.37796, abs=5e-6)

    @given(st.integers(0, 5), st.integers(0, 1), st.integers(0, 5),
           st.integers(0, 1), st.integers(1, 64))
    def test_only_three_values(self, r1, c1, r2, c2, nz):
        rho = radio.cross_correlation(SequenceId(r1, c1), SequenceId(r2, c2), nz)
        assert rho in (1.0, 0.0, 1.0 / math.sqrt(nz))


def _gain_setup():
    """Exponent-0 log-distance model: link gain is exactly the shadow term."""
    return ChannelParams(path_loss_model="log_distance", log_distance_ref_db=0.0,
                         log_distance_exponent=0.0)


class TestSinr:
    def mk_tx(self, entity, p_sc, berb=0, root=0, shift=0, pos=(0.0, 0.0)):
        return ActiveTransmission(entity=entity, position=pos,
                                  power_per_subcarrier_w=p_sc, n_subcarriers=7,
                                  berb=berb, seq=SequenceId(root, shift))

    def test_no_interferers(self):
        det = DetectionParams(noise_power_dbm=radio.watts_to_dbm(1e-12))
        # S = 7 subcarriers * power so that total = 1e-10 W
        tx = self.mk_tx(0, 1e-10 / 7.0)
        rx = Receiver(0, (10.0, 0.0), 1.5)
        links = {(0, 0): flat_link()}
        s = radio.sinr(tx, rx, [], links, det, _gain_setup())
        assert s == pytest.approx(100.0)

    def test_orthogonal_shift_interferer_is_free(self):
        det = DetectionParams(noise_power_dbm=radio.watts_to_dbm(1e-12))
        tx = self.mk_tx(0, 1e-10 / 7.0, root=2, shift=0)
        other = self.mk_tx(1, 5e-9, root=2, shift=1, pos=(3.0, 0.0))
        rx = Receiver(0, (10.0, 0.0), 1.5)
        links = {(0, 0): flat_link(), (1, 0): flat_link()}
        alone = radio.sinr(tx, rx, [], links, det, _gain_setup())
        with_it = radio.sinr(tx, rx, [other], links, det, _gain_setup())
        assert with_it == alone

    def test_three_transmitter_hand_fraction(self):
        # brute-force arithmetic over the three-term sum, written out by hand
        det = DetectionParams(noise_power_dbm=-100.0)
        target = self.mk_tx(0, 2e-11, root=0, shift=0)
        int_a = self.mk_tx(1, 3e-11, root=1, shift=0, pos=(5.0, 0.0))
        int_b = self.mk_tx(2, 1e-11, root=0, shift=0, pos=(0.0, 5.0))
        rx = Receiver(9, (10.0, 10.0), 1.5)
        links = {
            (0, 9): flat_link(shadow=0.0, h2=1.0),
            (1, 9): flat_link(shadow=3.0, h2=0.5),
            (2, 9): flat_link(shadow=-3.0, h2=2.0),
        }
        s = 7 * 2e-11 * 1.0 * 1.0
        i_a = (1 / math.sqrt(7)) * (7 * 3e-11 * 10 ** 0.3 * 0.5)
        i_b = 1.0 * (7 * 1e-11 * 10 ** -0.3 * 2.0)
        expect = s / (1e-13 + i_a + i_b)
        got = radio.sinr(target, rx, [int_a, int_b], links, det, _gain_setup())
        assert got == pytest.approx(expect, rel=1e-12)

    def test_empty_subcarrier_set_rejected(self):
        det = DetectionParams()
        tx = self.mk_tx(0, 1e-11)
        tx.n_subcarriers = 0
        with pytest.raises(ValueError):
            radio.sinr(tx, Receiver(0, (1.0, 0.0), 1.5), [], {(0, 0): flat_link()},
                       det, _gain_setup())

    def test_removing_interferer_never_decreases(self):
        det = DetectionParams(noise_power_dbm=-100.0)
        rng = np.random.default_rng(7)
        target = self.mk_tx(0, 1e-11)
        rx = Receiver(0, (10.0, 0.0), 1.5)
        ints = [self.mk_tx(i, 1e-11, root=i % 6, shift=i % 2, pos=(i + 1.0, 2.0))
                for i in range(1, 6)]
        links = {(i, 0): flat_link(shadow=rng.normal(0, 3), h2=rng.exponential())
                 for i in range(6)}
        full = radio.sinr(target, rx, ints, links, det, _gain_setup())
        for k in range(len(ints)):
            sub = ints[:k] + ints[k + 1:]
            assert radio.sinr(target, rx, sub, links, det, _gain_setup()) >= full

    def test_power_scaling_strictly_increases(self):
        det = DetectionParams(noise_power_dbm=-100.0)
        target = self.mk_tx(0, 1e-11)
        boosted = self.mk_tx(0, 3e-11)
        rx = Receiver(0, (10.0, 0.0), 1.5)
        other = self.mk_tx(1, 1e-11, root=1, pos=(5.0, 5.0))
        links = {(0, 0): flat_link(), (1, 0): flat_link()}
        lo = radio.sinr(target, rx, [other], links, det, _gain_setup())
        hi = radio.sinr(boosted, rx, [other], links, det, _gain_setup())
        assert hi > lo


def chi2_pdf(x, dof):
    from scipy.special import gamma
    return x ** (dof / 2.0 - 1.0) * math.exp(-x / 2.0) / (2 ** (dof / 2.0) * gamma(dof / 2.0))


class TestChi2:
    def test_origin(self):
        assert radio.chi2_cdf(0.0, 2) == 0.0

    def test_median_two_dof(self):
        assert radio.chi2_cdf(2.0 * math.log(2.0), 2) == pytest.approx(0.5, abs=1e-12)

    def test_against_numerical_integration(self):
        # independent quadrature of the chi-squared density (the dof=1
        # density has an integrable singularity, hence the err-based bound)
        for x, dof in ((4.0, 4), (1.5, 2), (9.0, 6), (0.3, 1), (11.0, 3)):
            ref, err = integrate.quad(chi2_pdf, 0.0, x, args=(dof,))
            tol = max(1e-9, 2.0 * err)
            assert radio.chi2_cdf(x, dof) == pytest.approx(ref, abs=tol)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            radio.chi2_cdf(-0.1, 2)

    def test_two_dof_closed_form_grid(self):
        xs = np.linspace(0.0, 50.0, 2001)
        got = np.array([radio.chi2_cdf(x, 2) for x in xs])
        ref = 1.0 - np.exp(-xs / 2.0)
        assert np.max(np.abs(got - ref)) < 1e-12

    def test_monotone(self):
        xs = np.linspace(0, 30, 301)
        vals = [radio.chi2_cdf(x, 4) for x in xs]
        assert all(b >= a for a, b in zip(vals, vals[1:]))


class TestMissDetection:
    def test_beyond_range_is_one(self):
        det = DetectionParams()
        assert radio.miss_detection_prob(1e9, det, 40.0) == 1.0
        assert radio.miss_detection_prob(0.0, det, 32.91) == 1.0

    def test_zero_sinr_single_window(self):
        det = DetectionParams(search_window=1)
        expect = radio.chi2_cdf(det.threshold, 2 * det.n_antennas)
        assert radio.miss_detection_prob(0.0, det, 1.0) == pytest.approx(expect)

    def test_reference_point(self):
        det = DetectionParams(n_antennas=1, search_window=1, threshold=9.2,
                              sequence_length=7)
        got = radio.miss_detection_prob(10.0, det, 5.0)
        assert got == pytest.approx(1.0 - math.exp(-9.2 / (2.0 * 71.0)), rel=1e-12)
        assert got == pytest.approx(0.0627, abs=5e-5)

    def test_closed_form_na1_d1(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            lam = rng.uniform(0.1, 40.0)
            s = rng.uniform(0.0, 1e3)
            det = DetectionParams(threshold=lam, sequence_length=7)
            closed = 1.0 - math.exp(-lam / (2.0 * (1.0 + 7.0 * s)))
            assert radio.miss_detection_prob(s, det, 1.0) == pytest.approx(
                closed, abs=1e-12)

    def test_negative_sinr_rejected(self):
        with pytest.raises(ValueError):
            radio.miss_detection_prob(-1.0, DetectionParams(), 1.0)

    @given(st.floats(0.0, 1e4), st.floats(0.0, 1e4))
    @settings(max_examples=200)
    def test_monotone_in_sinr(self, a, b):
        det = DetectionParams(n_antennas=2, search_window=3)
        lo, hi = sorted((a, b))
        assert radio.miss_detection_prob(hi, det, 1.0) <= \
            radio.miss_detection_prob(lo, det, 1.0)

    def test_monotone_in_threshold_and_bounded(self):
        for na, d in ((1, 1), (2, 1), (1, 4), (4, 2)):
            prev = 0.0
            for lam in np.linspace(0.1, 60.0, 60):
                det = DetectionParams(n_antennas=na, search_window=d, threshold=lam)
                p = radio.miss_detection_prob(3.0, det, 1.0)
                assert 0.0 <= p <= 1.0
                assert p >= prev - 1e-15
                prev = p


class TestFalseAlarm:
    def test_large_threshold_limit(self):
        det = DetectionParams(threshold=500.0)
        assert radio.false_alarm_prob(det) < 1e-12

    def test_closed_form_calibration(self):
        lam = radio.calibrate_threshold(0.01, 1, 1)
        assert lam == pytest.approx(-2.0 * math.log(0.01), abs=1e-8)
        assert lam == pytest.approx(9.2103, abs=1e-4)

    @pytest.mark.parametrize("pfa", [0.1, 0.01, 0.001])
    @pytest.mark.parametrize("na,d", [(1, 1), (2, 1), (1, 4), (4, 8)])
    def test_round_trip(self, pfa, na, d):
        lam = radio.calibrate_threshold(pfa, na, d)
        det = DetectionParams(n_antennas=na, search_window=d, threshold=lam)
        assert radio.false_alarm_prob(det) == pytest.approx(pfa, abs=1e-9)

    def test_bad_target_rejected(self):
        for bad in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ValueError):
                radio.calibrate_threshold(bad)


class TestDetect:
    def test_certain_outcomes(self):
        rng = np.random.default_rng(1)
        det = DetectionParams()
        assert not any(radio.detect(0.0, det, 100.0, rng) for _ in range(50))
        assert all(radio.detect(1e12, det, 1.0, rng) for _ in range(50))

    def test_bernoulli_rate(self):
        # choose sinr so P_MD = 0.3 exactly, then Monte-Carlo the sampler
        det = DetectionParams(threshold=9.21034037197618, sequence_length=7)
        target_pmd = 0.3
        s = (det.threshold / (-2.0 * math.log(1.0 - target_pmd)) - 1.0) / 7.0
        assert radio.miss_detection_prob(s, det, 1.0) == pytest.approx(0.3, abs=1e-12)
        rng = np.random.default_rng(123)
        n = 100_000
        hits = sum(radio.detect(s, det, 1.0, rng) for _ in range(n))
        assert hits / n == pytest.approx(0.700, abs=0.01)


def test_fast_fading_unit_mean():
    rng = np.random.default_rng(42)
    h2 = radio.sample_fast_fading(rng, 100_000)
    assert (h2 >= 0).all()
    assert 0.95 < h2.mean() < 1.05


def test_thermal_noise_reference():
    # derived-mode noise over 7 x 240 kHz at NF 9 dB
    got = radio.thermal_noise_dbm(7 * 240e3, 9.0, 290.0)
    assert got == pytest.approx(-102.72, abs=0.01)
