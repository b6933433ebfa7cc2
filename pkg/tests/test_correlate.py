"""Correlator tests against brute-force and analytic Poisson oracles."""

import numpy as np
import pytest

from hbtsim.correlate import (Histogram, cross_correlation, integrate_peaks,
                              normalize_g2, normalize_peak_counts,
                              pulse_decay_histogram, start_stop_histogram)
from hbtsim.stream import TimeTagStream


def make_stream(t1, t2, duration):
    t1 = np.asarray(t1, dtype=np.uint64)
    t2 = np.asarray(t2, dtype=np.uint64)
    channels = np.concatenate((np.ones(t1.size, np.uint8),
                               np.full(t2.size, 2, np.uint8)))
    times = np.concatenate((t1, t2))
    order = np.lexsort((channels, times))
    return TimeTagStream(duration=duration, channels=channels[order],
                         timestamps=times[order])


def swap_channels(stream):
    return TimeTagStream(duration=stream.duration,
                         channels=np.where(stream.channels == 1, 2, 1),
                         timestamps=stream.timestamps)


def poisson_channel(rate_cps, duration, rng):
    n = rng.poisson(rate_cps * duration / 1e12)
    return np.unique(rng.integers(0, duration, n))


def poisson_stream(rate_cps, duration, seed):
    rng = np.random.default_rng(seed)
    return make_stream(poisson_channel(rate_cps, duration, rng),
                       poisson_channel(rate_cps, duration, rng), duration)


def brute_force_cross(t1, t2, origin, bin_width, n_bins):
    counts = np.zeros(n_bins, dtype=np.int64)
    for a in np.asarray(t1, dtype=np.int64):
        for b in np.asarray(t2, dtype=np.int64):
            k = (b - a - origin) // bin_width
            if 0 <= k < n_bins:
                counts[k] += 1
    return counts


class TestStartStop:
    def test_single_pair_positive_delay(self):
        stream = make_stream([100], [100 + 37], 1000)
        hist = start_stop_histogram(stream, bin_width=10, tau_range=100)
        centers = hist.centers()
        assert hist.counts.sum() == 1
        bin_of_37 = int(np.flatnonzero(hist.counts == 1)[0])
        assert abs(centers[bin_of_37] - 37) <= 5

    def test_only_successive_pairs(self):
        # ch1 at 0; ch2 at 10 and 20: only the delay to 10 is counted
        stream = make_stream([0], [10, 20], 1000)
        hist = start_stop_histogram(stream, 1, 50)
        hit = hist.centers()[hist.counts > 0]
        assert hist.counts.sum() == 1
        assert abs(hit[0] - 10) < 1

    def test_swap_mirrors(self):
        rng = np.random.default_rng(3)
        stream = make_stream(np.unique(rng.integers(0, 10_000, 60)),
                             np.unique(rng.integers(0, 10_000, 60)), 10_000)
        fwd = start_stop_histogram(stream, 7, 300)
        rev = start_stop_histogram(swap_channels(stream), 7, 300)
        np.testing.assert_array_equal(fwd.counts, rev.counts[::-1])

    def test_empty_stream_is_empty_histogram(self):
        stream = make_stream([], [], 100)
        hist = start_stop_histogram(stream, 5, 20)
        assert hist.counts.sum() == 0

    def test_poisson_interphoton_envelope(self):
        # delay to the next opposite-channel event of a Poisson channel is
        # exponential with the channel rate
        duration = 2_000_000_000_000  # 2 s
        rate = 50_000.0
        stream = poisson_stream(rate, duration, seed=11)
        bin_width = 1_000_000  # 1 us
        hist = start_stop_histogram(stream, bin_width, 20_000_000)
        centers = hist.centers()
        pos = centers > 0
        n2 = stream.channel_times(2).size
        n1 = stream.channel_times(1).size
        rate2_per_tick = n2 / duration
        expected = n1 * rate2_per_tick * bin_width * \
            np.exp(-rate2_per_tick * centers[pos])
        observed = hist.counts[pos]
        z = (observed - expected) / np.sqrt(expected)
        assert np.all(np.abs(z) < 4.5)


class TestCrossCorrelation:
    def test_single_pair_matches_start_stop(self):
        stream = make_stream([100], [137], 1000)
        ss = start_stop_histogram(stream, 10, 100)
        cc = cross_correlation(stream, 10, 100)
        np.testing.assert_array_equal(ss.counts, cc.counts)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(5)
        stream = make_stream(np.unique(rng.integers(0, 5_000, 80)),
                             np.unique(rng.integers(0, 5_000, 90)), 5_000)
        hist = cross_correlation(stream, 13, 400)
        expected = brute_force_cross(stream.channel_times(1),
                                     stream.channel_times(2),
                                     hist.origin, hist.bin_width, hist.n_bins)
        np.testing.assert_array_equal(hist.counts, expected)

    def test_swap_antisymmetry(self):
        rng = np.random.default_rng(6)
        stream = make_stream(np.unique(rng.integers(0, 20_000, 200)),
                             np.unique(rng.integers(0, 20_000, 220)), 20_000)
        fwd = cross_correlation(stream, 9, 500)
        rev = cross_correlation(swap_channels(stream), 9, 500)
        np.testing.assert_array_equal(fwd.counts, rev.counts[::-1])

    def test_poisson_flat_within_4_sigma(self):
        duration = 10_000_000_000_000  # 10 s
        stream = poisson_stream(100_000.0, duration, seed=21)
        hist = cross_correlation(stream, 100_000, 2_000_000)  # 0.1 us bins
        n1 = stream.channel_times(1).size
        n2 = stream.channel_times(2).size
        expected = n1 * n2 * hist.bin_width / duration
        z = (hist.counts - expected) / np.sqrt(expected)
        assert np.all(np.abs(z) < 4.0)

    def test_start_stop_is_binwise_subset(self):
        stream = poisson_stream(80_000.0, 2_000_000_000_000, seed=31)
        ss = start_stop_histogram(stream, 50_000, 1_000_000)
        cc = cross_correlation(stream, 50_000, 1_000_000)
        assert np.all(ss.counts <= cc.counts)

    def test_low_rate_start_stop_equivalence(self):
        # tau * rate = 0.02 at the window edge: successive-pair and
        # all-pairs estimators agree within 5 percent after normalization
        duration = 500_000_000_000_000  # 500 s
        rate = 2_000.0
        stream = poisson_stream(rate, duration, seed=41)
        bin_width = 1_000_000
        tau_range = 10_000_000  # 10 us
        ss = start_stop_histogram(stream, bin_width, tau_range)
        cc = cross_correlation(stream, bin_width, tau_range)
        ratio = ss.counts / np.maximum(cc.counts, 1)
        assert np.max(np.abs(ratio - 1.0)) < 0.05

    def test_cost_scales_linearly(self):
        base = poisson_stream(100_000.0, 2_000_000_000_000, seed=51)
        double = poisson_stream(100_000.0, 4_000_000_000_000, seed=52)
        _, ops1 = cross_correlation(base, 128, 100_000, return_ops=True)
        _, ops2 = cross_correlation(double, 128, 100_000, return_ops=True)
        n_ratio = len(double) / len(base)
        assert ops2 / ops1 < 1.4 * n_ratio


class TestNormalizeG2:
    def test_poisson_normalizes_to_unity(self):
        duration = 10_000_000_000_000  # 10 s
        stream = poisson_stream(100_000.0, duration, seed=61)
        # +-5.5 us of 0.128 ns bins: over 1e6 pairs in range
        hist = cross_correlation(stream, 128, 5_500_000)
        assert hist.counts.sum() >= 1_000_000
        n1, n2 = stream.rates()
        g2 = normalize_g2(hist, n1, n2, stream.duration_seconds)
        assert 0.99 <= g2.values.mean() <= 1.01

    def test_zero_counts_zero_values(self):
        hist = Histogram(bin_width=10, origin=-55, counts=np.zeros(11, int),
                         total_pairs=0)
        g2 = normalize_g2(hist, 100.0, 100.0, 1.0)
        assert np.all(g2.values == 0)
        assert np.all(g2.statistical_sigma == 0)

    def test_intensive_under_doubled_acquisition(self):
        counts = np.arange(11)
        h1 = Histogram(bin_width=10, origin=-55, counts=counts, total_pairs=100)
        h2 = Histogram(bin_width=10, origin=-55, counts=2 * counts,
                       total_pairs=200)
        g1 = normalize_g2(h1, 50.0, 60.0, 2.0)
        g2 = normalize_g2(h2, 50.0, 60.0, 4.0)
        np.testing.assert_allclose(g1.values, g2.values)

    def test_zero_denominator_rejected(self):
        hist = Histogram(bin_width=10, origin=0, counts=np.ones(4, int),
                         total_pairs=4)
        with pytest.raises(ValueError):
            normalize_g2(hist, 0.0, 100.0, 1.0)


def comb_histogram(theta, bin_width, n_peaks, counts_at_peaks):
    """Histogram covering peaks -n_peaks..n_peaks exactly, with the given
    count placed in the bin containing each m*theta."""
    n_side = n_peaks * theta // bin_width + theta // (2 * bin_width)
    origin = -n_side * bin_width - bin_width // 2
    n_bins = 2 * n_side + 1
    counts = np.zeros(n_bins, dtype=np.int64)
    for m in range(-n_peaks, n_peaks + 1):
        counts[(m * theta - origin) // bin_width] += counts_at_peaks
    return Histogram(bin_width=bin_width, origin=origin, counts=counts,
                     total_pairs=int(counts.sum()))


class TestPeaks:
    THETA = 1000

    def test_delta_comb(self):
        hist = comb_histogram(self.THETA, 10, 5, 1)
        peaks = integrate_peaks(hist, self.THETA, self.THETA)
        for m in range(-5, 6):
            assert peaks.peak(m) == 1

    def test_full_window_partitions_counts(self):
        # histogram spanning exactly peaks -3..3 with window = theta:
        # the window sums partition every count
        rng = np.random.default_rng(71)
        n_peaks = 3
        bin_width = 100
        origin = -(n_peaks * self.THETA + self.THETA // 2)
        n_bins = (2 * n_peaks + 1) * self.THETA // bin_width
        counts = rng.integers(0, 50, n_bins)
        hist = Histogram(bin_width=bin_width, origin=origin, counts=counts,
                         total_pairs=int(counts.sum()))
        peaks = integrate_peaks(hist, self.THETA, self.THETA)
        assert peaks.indices.tolist() == list(range(-3, 4))
        assert peaks.raw_counts.sum() == hist.counts.sum()

    def test_window_bigger_than_theta_rejected(self):
        hist = comb_histogram(self.THETA, 10, 3, 1)
        with pytest.raises(ValueError):
            integrate_peaks(hist, self.THETA, self.THETA + 10)

    def test_histogram_not_covering_center_rejected(self):
        hist = Histogram(bin_width=10, origin=5_000, counts=np.ones(100, int),
                         total_pairs=100)
        with pytest.raises(ValueError):
            integrate_peaks(hist, self.THETA, self.THETA)

    def test_normalization_applies_rate_denominator(self):
        hist = comb_histogram(self.THETA, 10, 4, 7)
        peaks = integrate_peaks(hist, self.THETA, self.THETA)
        n1 = n2 = 1000.0
        t_acq = 2.0
        theta_s = self.THETA * 1e-12
        series = normalize_peak_counts(peaks, n1, n2, self.THETA, t_acq)
        expected = 7 / (n1 * n2 * theta_s * t_acq)
        np.testing.assert_allclose(series.normalized,
                                   np.full(9, expected))

    def test_zero_denominator_rejected(self):
        peaks = integrate_peaks(comb_histogram(self.THETA, 10, 3, 1),
                                self.THETA, self.THETA)
        with pytest.raises(ValueError):
            normalize_peak_counts(peaks, 0.0, 10.0, self.THETA, 1.0)


class TestPulseDecayHistogram:
    def test_phases_fold_onto_period(self):
        theta = 1000
        t1 = np.array([10, 1010, 2010, 3035], dtype=np.uint64)
        t2 = np.array([515, 1515], dtype=np.uint64)
        stream = make_stream(t1, t2, 4000)
        hist = pulse_decay_histogram(stream, theta, 10)
        assert hist.counts.sum() == 6
        assert hist.counts[1] == 3   # phase 10
        assert hist.counts[51] == 2  # phase 515
        assert hist.counts[3] == 1   # phase 3035 % 1000 = 35
