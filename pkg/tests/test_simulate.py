"""Simulator tests: telegraph statistics, detection chain, cw renewal
process, pulsed event skipping and its per-pulse-loop oracle."""

import numpy as np
import pytest
from scipy import stats

from hbtsim.model import (DetectionParams, EmitterParams, ExcitationCW,
                          ExcitationPulsed, predicted_saturated_rate)
from hbtsim.correlate import (cross_correlation, integrate_peaks,
                              normalize_g2, normalize_peak_counts,
                              pulse_decay_histogram)
from hbtsim.estimate import fit_exponential_decay
from hbtsim.model import eval_cn_model
from hbtsim.simulate import (apply_detection_chain, loop_pulse_indices,
                             sample_telegraph, simulate_attenuated_laser,
                             simulate_cw, simulate_pulsed, skip_pulse_indices)
from hbtsim.stream import validate_stream
from hbtsim.units import PS_PER_MS, PS_PER_NS, PS_PER_S, PS_PER_US

PAPER_EMITTER = EmitterParams(radiative_lifetime=2.1, t_on_mean=9.1,
                              t_off_mean=7.0, pump_coefficient=7.2)

CLEAN = dict(splitter_ratio=0.5, background_rate=0.0, dead_time=0.0,
             jitter_sigma=0.0)


def pulse_on_mask(trace, theta, n_pulses):
    """Independent oracle: is pulse k inside an emitting segment?"""
    t = np.arange(n_pulses, dtype=np.int64) * theta
    seg = np.searchsorted(trace.boundaries.astype(np.int64), t, side="right") - 1
    return trace.states[np.clip(seg, 0, trace.n_segments - 1)]


class TestTelegraph:
    def test_duty_cycle_matches_dwell_means(self):
        trace = sample_telegraph(PAPER_EMITTER, PS_PER_S, seed=10)
        expected = 9.1 / 16.1
        assert abs(trace.on_fraction() - expected) < 0.01

    def test_vanishing_off_time_gives_on_trace(self):
        em = EmitterParams(radiative_lifetime=2.0, t_on_mean=100.0,
                           t_off_mean=100.0 * 1e-6, pump_coefficient=1.0)
        trace = sample_telegraph(em, PS_PER_S, seed=11)
        assert trace.on_fraction() > 1.0 - 1e-4

    def test_same_seed_same_trace(self):
        a = sample_telegraph(PAPER_EMITTER, PS_PER_MS, seed=3)
        b = sample_telegraph(PAPER_EMITTER, PS_PER_MS, seed=3)
        np.testing.assert_array_equal(a.boundaries, b.boundaries)
        assert a.first_state_on == b.first_state_on

    def test_alternating_and_contiguous(self):
        trace = sample_telegraph(PAPER_EMITTER, PS_PER_MS, seed=4)
        assert trace.boundaries[0] == 0
        assert trace.boundaries[-1] == trace.duration
        assert np.all(np.diff(trace.boundaries.astype(np.int64)) > 0)
        states = trace.states
        assert np.all(states[1:] != states[:-1])

    def test_dwell_means_match_parameters(self):
        trace = sample_telegraph(PAPER_EMITTER, PS_PER_S, seed=5)
        lengths = np.diff(trace.boundaries.astype(np.int64))
        on_mean = lengths[trace.states].mean() / PS_PER_US
        off_mean = lengths[~trace.states].mean() / PS_PER_US
        assert on_mean == pytest.approx(9.1, rel=0.02)
        assert off_mean == pytest.approx(7.0, rel=0.02)


class TestDetectionChain:
    def test_identity_chain(self):
        epochs = np.array([10, 200, 3000, 40_000], dtype=float)
        det = DetectionParams(overall_efficiency=1.0, splitter_ratio=1.0,
                              background_rate=0.0, dead_time=0.0,
                              jitter_sigma=0.0)
        stream = apply_detection_chain(epochs, det, 100_000, seed=1)
        np.testing.assert_array_equal(stream.channel_times(1),
                                      epochs.astype(np.uint64))
        assert stream.channel_times(2).size == 0

    def test_dead_time_drops_close_pair(self):
        det = DetectionParams(overall_efficiency=1.0, splitter_ratio=1.0,
                              background_rate=0.0, dead_time=100.0,
                              jitter_sigma=0.0)
        # second epoch D/2 after the first on the same channel
        epochs = np.array([1000.0, 1000.0 + 50_000.0 / 2])
        stream = apply_detection_chain(epochs, det, 1_000_000, seed=2)
        np.testing.assert_array_equal(stream.channel_times(1), [1000])

    def test_thinning_is_binomial(self):
        n = 40_000
        epochs = np.arange(n, dtype=float) * 1000.0
        det = DetectionParams(overall_efficiency=0.5, splitter_ratio=0.5,
                              background_rate=0.0, dead_time=0.0,
                              jitter_sigma=0.0)
        stream = apply_detection_chain(epochs, det, n * 1000, seed=3)
        sigma = np.sqrt(n * 0.5 * 0.5)
        assert abs(len(stream) - n * 0.5) < 3 * sigma

    def test_unsorted_epochs_rejected(self):
        det = DetectionParams(overall_efficiency=1.0)
        with pytest.raises(ValueError):
            apply_detection_chain([100.0, 50.0], det, 1000, seed=1)

    def test_out_of_range_epochs_rejected(self):
        det = DetectionParams(overall_efficiency=1.0)
        with pytest.raises(ValueError):
            apply_detection_chain([100.0, 2000.0], det, 1000, seed=1)

    def test_jitter_then_dead_time_keeps_invariants(self):
        rng = np.random.default_rng(7)
        epochs = np.sort(rng.integers(0, 10_000_000, 20_000)).astype(float)
        det = DetectionParams(overall_efficiency=0.9, splitter_ratio=0.5,
                              background_rate=50_000.0, dead_time=50.0,
                              jitter_sigma=300.0)
        stream = apply_detection_chain(epochs, det, 10_000_000, seed=4)
        validate_stream(stream, dead_time_ticks=50 * PS_PER_NS)


class TestSimulateCW:
    def test_zero_efficiency_background_only(self):
        det = DetectionParams(overall_efficiency=0.0, splitter_ratio=0.5,
                              background_rate=20_000.0, dead_time=0.0,
                              jitter_sigma=0.0)
        duration = PS_PER_S
        stream = simulate_cw(PAPER_EMITTER, ExcitationCW(power=100.0), det,
                             duration, seed=20)
        expected = 20_000.0
        for channel in (1, 2):
            n = stream.channel_times(channel).size
            assert abs(n - expected) < 3 * np.sqrt(expected)

    def test_zero_power_background_only(self):
        det = DetectionParams(overall_efficiency=0.5, background_rate=5000.0,
                              dead_time=0.0, jitter_sigma=0.0)
        stream = simulate_cw(PAPER_EMITTER, ExcitationCW(power=0.0), det,
                             PS_PER_S, seed=21)
        total = len(stream)
        assert abs(total - 10_000) < 3 * np.sqrt(10_000)

    def test_determinism(self):
        det = DetectionParams(overall_efficiency=0.3, **CLEAN)
        a = simulate_cw(PAPER_EMITTER, ExcitationCW(power=50.0), det,
                        10 * PS_PER_MS, seed=22)
        b = simulate_cw(PAPER_EMITTER, ExcitationCW(power=50.0), det,
                        10 * PS_PER_MS, seed=22)
        np.testing.assert_array_equal(a.timestamps, b.timestamps)
        np.testing.assert_array_equal(a.channels, b.channels)

    def test_antibunching_dip(self):
        em = EmitterParams(radiative_lifetime=2.1, t_on_mean=1e5,
                           t_off_mean=10.0, pump_coefficient=1.0)
        det = DetectionParams(overall_efficiency=0.8, **CLEAN)
        stream = simulate_cw(em, ExcitationCW(power=100.0), det,
                             15 * PS_PER_MS, seed=23)
        assert len(stream) >= 1_000_000
        hist = cross_correlation(stream, 128, 6000)
        n1, n2 = stream.rates()
        g2 = normalize_g2(hist, n1, n2, stream.duration_seconds)
        center = int(np.argmin(np.abs(g2.tau_ps)))
        assert g2.values[center] < 0.05

    def test_blinking_plateau_matches_peak_model(self):
        # bunching plateau of the normalized correlation at
        # dip << tau << T_on follows the zero-separation peak model
        em = EmitterParams(radiative_lifetime=2.1, t_on_mean=9.1,
                           t_off_mean=7.0, pump_coefficient=1.0)
        det = DetectionParams(overall_efficiency=0.2, **CLEAN)
        stream = simulate_cw(em, ExcitationCW(power=20.0), det,
                             2 * PS_PER_S, seed=24)
        hist = cross_correlation(stream, 2000, 302_000)
        n1, n2 = stream.rates()
        g2 = normalize_g2(hist, n1, n2, stream.duration_seconds)
        sel = (np.abs(g2.tau_ps) > 20_000) & (np.abs(g2.tau_ps) < 300_000)
        tau_us = np.abs(g2.tau_ps[sel]) / PS_PER_US
        model = np.array([eval_cn_model(1, 9.1, 7.0, t) for t in tau_us])
        ratio = g2.values[sel] / model
        assert abs(ratio.mean() - 1.0) < 0.03


class TestSimulatePulsed:
    DET = DetectionParams(overall_efficiency=0.0031, **CLEAN)

    def test_rep_period_precondition(self):
        with pytest.raises(ValueError):
            simulate_pulsed(PAPER_EMITTER,
                            ExcitationPulsed(rep_period=20.0,
                                             excitation_prob=0.5),
                            self.DET, PS_PER_MS, seed=1)

    def test_zero_excitation_background_only(self):
        det = DetectionParams(overall_efficiency=0.5, splitter_ratio=0.5,
                              background_rate=1000.0, dead_time=0.0,
                              jitter_sigma=0.0)
        stream = simulate_pulsed(PAPER_EMITTER,
                                 ExcitationPulsed(rep_period=50.0,
                                                  excitation_prob=0.0),
                                 det, PS_PER_S, seed=2)
        assert abs(len(stream) - 2000) < 3 * np.sqrt(2000)

    def test_determinism(self):
        exc = ExcitationPulsed(rep_period=50.0, excitation_prob=0.8)
        a = simulate_pulsed(PAPER_EMITTER, exc, self.DET, PS_PER_S, seed=3)
        b = simulate_pulsed(PAPER_EMITTER, exc, self.DET, PS_PER_S, seed=3)
        np.testing.assert_array_equal(a.timestamps, b.timestamps)
        np.testing.assert_array_equal(a.channels, b.channels)
        c = simulate_pulsed(PAPER_EMITTER, exc, self.DET, PS_PER_S, seed=4)
        assert not np.array_equal(a.timestamps, c.timestamps)

    def test_saturated_rate_matches_prediction(self):
        exc = ExcitationPulsed(rep_period=50.0, excitation_prob=1.0)
        duration = 5 * PS_PER_S
        stream = simulate_pulsed(PAPER_EMITTER, exc, self.DET, duration,
                                 seed=5)
        expected = predicted_saturated_rate(self.DET, PAPER_EMITTER, 50.0) * 5
        assert abs(len(stream) - expected) < 3 * np.sqrt(expected)
        validate_stream(stream)

    def test_central_peak_suppressed_and_first_peak_bunched(self):
        exc = ExcitationPulsed(rep_period=50.0, excitation_prob=1.0)
        duration = 10 * PS_PER_S
        theta = 50_000
        stream = simulate_pulsed(PAPER_EMITTER, exc, self.DET, duration,
                                 seed=6)
        hist = cross_correlation(stream, 1000, 10 * theta)
        n1, n2 = stream.rates()
        peaks = normalize_peak_counts(integrate_peaks(hist, theta, theta),
                                      n1, n2, theta, stream.duration_seconds)
        assert peaks.normalized_peak(0) < 0.05
        expected = eval_cn_model(1, 9.1, 7.0, 0.050)
        pairs = peaks.peak(1)
        sigma = np.sqrt(expected / max(pairs / expected, 1.0))
        assert abs(peaks.normalized_peak(1) - expected) < 4 * sigma

    def test_decay_histogram_recovers_lifetime(self):
        det = DetectionParams(overall_efficiency=0.0031, splitter_ratio=0.5,
                              background_rate=0.0, dead_time=0.0,
                              jitter_sigma=150.0)
        exc = ExcitationPulsed(rep_period=50.0, excitation_prob=1.0)
        stream = simulate_pulsed(PAPER_EMITTER, exc, det, 10 * PS_PER_S,
                                 seed=7)
        assert len(stream) >= 100_000
        decay = pulse_decay_histogram(stream, 50_000, 32)
        peak = float(decay.centers()[int(np.argmax(decay.counts))])
        fit = fit_exponential_decay(decay, (peak + 1000, 45_000))
        assert fit.converged
        assert fit.parameters["lifetime"] == pytest.approx(2.1, rel=0.05)


class TestEventSkipping:
    EM = EmitterParams(radiative_lifetime=2.1, t_on_mean=2.0, t_off_mean=1.5,
                       pump_coefficient=1.0)
    THETA = 50_000

    def test_exact_match_with_shared_decisions(self):
        duration = 10 * PS_PER_MS
        n_pulses = -(-duration // self.THETA)
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            trace = sample_telegraph(self.EM, duration, rng)
            p = 0.3
            decisions = np.random.default_rng(200 + seed).random(n_pulses) < p
            naive = loop_pulse_indices(trace, self.THETA, n_pulses, p,
                                       decisions=decisions)
            on_mask = pulse_on_mask(trace, self.THETA, n_pulses)
            bits = decisions[on_mask]
            succ = np.flatnonzero(bits)
            gaps = np.diff(np.concatenate(([-1], succ))) - 1
            skipped = skip_pulse_indices(trace, self.THETA, n_pulses, p,
                                         gaps=gaps)
            np.testing.assert_array_equal(naive, skipped)
            # both must only fire during emitting periods
            assert on_mask[naive].all()

    def test_rate_agreement_with_loop(self):
        duration = 10 * PS_PER_MS
        n_pulses = -(-duration // self.THETA)
        trace = sample_telegraph(self.EM, duration, seed=300)
        p = 0.2
        n_skip = skip_pulse_indices(trace, self.THETA, n_pulses, p,
                                    rng=np.random.default_rng(1)).size
        n_loop = loop_pulse_indices(trace, self.THETA, n_pulses, p,
                                    rng=np.random.default_rng(2)).size
        expected = pulse_on_mask(trace, self.THETA, n_pulses).sum() * p
        assert abs(n_skip - expected) < 4 * np.sqrt(expected)
        assert abs(n_loop - expected) < 4 * np.sqrt(expected)

    def test_interdetection_delays_same_distribution(self):
        duration = 10 * PS_PER_MS
        n_pulses = -(-duration // self.THETA)
        delays_skip = []
        delays_loop = []
        for seed in range(5):
            trace = sample_telegraph(self.EM, duration, seed=400 + seed)
            p = 0.25
            a = skip_pulse_indices(trace, self.THETA, n_pulses, p,
                                   rng=np.random.default_rng(500 + seed))
            b = loop_pulse_indices(trace, self.THETA, n_pulses, p,
                                   rng=np.random.default_rng(600 + seed))
            delays_skip.append(np.diff(a))
            delays_loop.append(np.diff(b))
        result = stats.ks_2samp(np.concatenate(delays_skip),
                                np.concatenate(delays_loop))
        assert result.pvalue > 0.01


class TestAttenuatedLaser:
    def test_total_rate(self):
        det = DetectionParams(overall_efficiency=1.0, **CLEAN)
        stream = simulate_attenuated_laser(50_000.0, 50.0, det, PS_PER_S,
                                           seed=30)
        assert abs(len(stream) - 50_000) < 3 * np.sqrt(50_000)
        validate_stream(stream)

    def test_peaks_normalize_to_unity(self):
        det = DetectionParams(overall_efficiency=1.0, splitter_ratio=0.5,
                              background_rate=0.0, dead_time=0.0,
                              jitter_sigma=150.0)
        stream = simulate_attenuated_laser(200_000.0, 50.0, det,
                                           20 * PS_PER_S, seed=31)
        theta = 50_000
        hist = cross_correlation(stream, 1000, 5 * theta)
        n1, n2 = stream.rates()
        peaks = normalize_peak_counts(integrate_peaks(hist, theta, theta),
                                      n1, n2, theta, stream.duration_seconds)
        values = peaks.normalized
        assert np.all(np.abs(values - 1.0) < 0.05)
