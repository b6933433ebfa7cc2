"""Coincidence histograms, normalized g2 curves and pulsed peak series.

Two delay estimators are provided: the start-stop histogram (delay from
each event to the next event on the other channel, the quantity TCSPC
hardware records) and the full all-pairs cross-correlation, which is the
estimator the normalized autocorrelation refers to.  Peak integration and
normalization convert a pulsed cross-correlation histogram into the
normalized per-peak coincidence numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import pair_sweep
from .stream import TimeTagStream
from .units import PS_PER_S

__all__ = [
    "Histogram",
    "G2Curve",
    "PeakSeries",
    "start_stop_histogram",
    "cross_correlation",
    "normalize_g2",
    "integrate_peaks",
    "normalize_peak_counts",
    "pulse_decay_histogram",
]

DEFAULT_BIN_WIDTH_PS = 128  # 0.128 ns time bins


@dataclass(frozen=True)
class Histogram:
    """Binned delay counts: half-open bins ``[origin + i*bin_width,
    origin + (i+1)*bin_width)`` in ticks; ``total_pairs`` counts the
    candidate pairs examined (in range or not)."""

    bin_width: int
    origin: int
    counts: np.ndarray
    total_pairs: int
    resolution_ps: int = 1

    def __post_init__(self):
        object.__setattr__(self, "counts",
                           np.ascontiguousarray(self.counts, dtype=np.int64))
        if self.bin_width <= 0:
            raise ValueError("bin_width must be > 0")
        if self.counts.size < 1:
            raise ValueError("histogram needs at least one bin")
        if np.any(self.counts < 0):
            raise ValueError("counts must be >= 0")

    @property
    def n_bins(self) -> int:
        return self.counts.size

    def centers(self) -> np.ndarray:
        """Bin centers in ticks (float)."""
        return self.origin + (np.arange(self.n_bins) + 0.5) * self.bin_width

    def bin_width_seconds(self) -> float:
        return self.bin_width * self.resolution_ps / PS_PER_S


@dataclass(frozen=True)
class G2Curve:
    """Normalized coincidence curve: delay axis in ps, dimensionless
    values, and the per-bin Poisson standard error."""

    tau_ps: np.ndarray
    values: np.ndarray
    statistical_sigma: np.ndarray

    def __post_init__(self):
        tau = np.asarray(self.tau_ps, dtype=np.float64)
        val = np.asarray(self.values, dtype=np.float64)
        sig = np.asarray(self.statistical_sigma, dtype=np.float64)
        if not (tau.shape == val.shape == sig.shape):
            raise ValueError("axes must share one shape")
        if not (np.all(np.isfinite(val)) and np.all(val >= 0)):
            raise ValueError("values must be finite and >= 0")
        for name, arr in (("tau_ps", tau), ("values", val),
                          ("statistical_sigma", sig)):
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class PeakSeries:
    """Per-pulse-peak integrated coincidences and their normalized values."""

    indices: np.ndarray
    raw_counts: np.ndarray
    window: int
    normalized: np.ndarray | None = None
    resolution_ps: int = 1

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        raw = np.asarray(self.raw_counts, dtype=np.int64)
        if idx.shape != raw.shape:
            raise ValueError("indices and raw_counts must share one shape")
        if 0 not in idx:
            raise ValueError("peak series must include the central peak m=0")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "raw_counts", raw)
        if self.normalized is not None:
            norm = np.asarray(self.normalized, dtype=np.float64)
            if norm.shape != idx.shape:
                raise ValueError("normalized must match indices")
            object.__setattr__(self, "normalized", norm)

    def peak(self, m: int) -> int:
        """Raw coincidence count of peak ``m``."""
        where = np.flatnonzero(self.indices == m)
        if where.size == 0:
            raise KeyError(f"peak m={m} not in series")
        return int(self.raw_counts[where[0]])

    def normalized_peak(self, m: int) -> float:
        if self.normalized is None:
            raise ValueError("series has no normalized values yet")
        where = np.flatnonzero(self.indices == m)
        if where.size == 0:
            raise KeyError(f"peak m={m} not in series")
        return float(self.normalized[where[0]])


def _symmetric_axis(bin_width: int, tau_range: int) -> tuple[int, int]:
    """(origin, n_bins) of a delay axis with tau=0 at the center bin's
    midpoint, spanning at least +-tau_range."""
    if bin_width <= 0:
        raise ValueError("bin_width must be > 0")
    if tau_range < bin_width:
        raise ValueError("tau_range must be >= bin_width")
    n_side = -(-tau_range // bin_width)
    origin = -n_side * bin_width - bin_width // 2
    return int(origin), int(2 * n_side + 1)


def start_stop_histogram(stream: TimeTagStream, bin_width: int,
                         tau_range: int) -> Histogram:
    """Histogram of delays from each event to the *next* event on the
    other channel (positive: channel 1 -> next channel 2; negative:
    channel 2 -> next later channel 1)."""
    origin, n_bins = _symmetric_axis(bin_width, tau_range)
    t1 = stream.channel_times(1).astype(np.int64)
    t2 = stream.channel_times(2).astype(np.int64)
    taus = []
    # forward delays, ties at tau=0 counted on the positive side only
    idx = np.searchsorted(t2, t1, side="left")
    ok = idx < t2.size
    taus.append(t2[idx[ok]] - t1[ok])
    idx = np.searchsorted(t1, t2, side="right")
    ok = idx < t1.size
    taus.append(t2[ok] - t1[idx[ok]])
    tau = np.concatenate(taus) if taus else np.empty(0, np.int64)
    bins = (tau - origin) // bin_width
    in_range = (bins >= 0) & (bins < n_bins)
    counts = np.bincount(bins[in_range], minlength=n_bins)
    return Histogram(bin_width=int(bin_width), origin=origin, counts=counts,
                     total_pairs=int(tau.size),
                     resolution_ps=stream.resolution_ps)


def cross_correlation(stream: TimeTagStream, bin_width: int, tau_range: int,
                      return_ops: bool = False):
    """All-pairs channel 1 x channel 2 delay histogram via a sorted
    two-pointer sweep; cost is O(n1 + n2 + pairs in range).

    With ``return_ops`` also returns the sweep's comparison counter, used
    to assert the linear cost scaling.
    """
    origin, n_bins = _symmetric_axis(bin_width, tau_range)
    t1 = stream.channel_times(1).astype(np.int64)
    t2 = stream.channel_times(2).astype(np.int64)
    counts, pairs, ops = pair_sweep(t1, t2, np.int64(origin),
                                    np.int64(bin_width), np.int64(n_bins))
    hist = Histogram(bin_width=int(bin_width), origin=origin, counts=counts,
                     total_pairs=int(pairs), resolution_ps=stream.resolution_ps)
    return (hist, int(ops)) if return_ops else hist


def normalize_g2(hist: Histogram, n1: float, n2: float, t_acq: float) -> G2Curve:
    """Normalize a delay histogram by the Poissonian pair expectation
    ``n1 * n2 * bin_width * t_acq`` (rates in counts/s, ``t_acq`` in s)."""
    denom = n1 * n2 * hist.bin_width_seconds() * t_acq
    if denom <= 0 or not np.isfinite(denom):
        raise ValueError("normalization denominator must be positive")
    values = hist.counts / denom
    sigma = np.sqrt(hist.counts) / denom
    return G2Curve(tau_ps=hist.centers() * hist.resolution_ps,
                   values=values, statistical_sigma=sigma)


def integrate_peaks(hist: Histogram, theta: int, window: int) -> PeakSeries:
    """Integrate coincidences over windows ``[m*theta - window/2,
    m*theta + window/2)`` for every peak whose window the histogram fully
    covers.  ``window == theta`` partitions all in-range counts."""
    if window <= 0:
        raise ValueError("window must be > 0")
    if window > theta:
        raise ValueError("window must not exceed theta (windows would overlap)")
    centers = hist.centers()
    half = window / 2.0
    lo_edge = hist.origin
    hi_edge = hist.origin + hist.n_bins * hist.bin_width
    m_min = -(-(lo_edge + half) // theta)   # smallest m with window inside
    m_max = (hi_edge - half) // theta
    if m_min > 0 or m_max < 0:
        raise ValueError("histogram range does not cover the central peak")
    m = np.arange(int(m_min), int(m_max) + 1)
    # assign bins to peaks by bin center, with the window half-open on
    # the right so that window == theta partitions the counts exactly
    peak_of_bin = np.floor((centers + theta / 2.0) / theta).astype(np.int64)
    offset = centers - peak_of_bin * theta
    ok = ((offset >= -half) & (offset < half)
          & (peak_of_bin >= m_min) & (peak_of_bin <= m_max))
    raw = np.zeros(m.size, dtype=np.int64)
    np.add.at(raw, peak_of_bin[ok] - int(m_min), hist.counts[ok])
    return PeakSeries(indices=m, raw_counts=raw, window=int(window),
                      resolution_ps=hist.resolution_ps)


def normalize_peak_counts(peaks: PeakSeries, n1: float, n2: float, theta: int,
                          t_acq: float) -> PeakSeries:
    """Normalize raw peak counts by ``n1 * n2 * theta * t_acq`` (rates in
    counts/s, theta in ticks, ``t_acq`` in s)."""
    theta_s = theta * peaks.resolution_ps / PS_PER_S
    denom = n1 * n2 * theta_s * t_acq
    if denom <= 0 or not np.isfinite(denom):
        raise ValueError("normalization denominator must be positive")
    return PeakSeries(indices=peaks.indices, raw_counts=peaks.raw_counts,
                      window=peaks.window,
                      normalized=peaks.raw_counts / denom,
                      resolution_ps=peaks.resolution_ps)


def pulse_decay_histogram(stream: TimeTagStream, theta: int,
                          bin_width: int) -> Histogram:
    """Histogram of detection times modulo the pulse period (both
    channels), i.e. the delay between trigger pulses and detections."""
    if bin_width <= 0 or theta <= 0 or bin_width > theta:
        raise ValueError("need 0 < bin_width <= theta")
    phase = (stream.timestamps.astype(np.int64) % theta)
    n_bins = -(-theta // bin_width)
    bins = phase // bin_width
    counts = np.bincount(bins, minlength=n_bins)
    return Histogram(bin_width=int(bin_width), origin=0, counts=counts,
                     total_pairs=int(phase.size),
                     resolution_ps=stream.resolution_ps)
