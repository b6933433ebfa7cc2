"""Kinetic Monte Carlo generation of detection time-tag streams.

A blinking emitter is modeled as an exponential on/off telegraph process;
during emitting periods the photon epochs follow either a pump+decay
renewal process (cw excitation) or an at-most-one-photon-per-pulse rule
(pulsed excitation).  The pulsed generator is event-skipping: it samples
the next detected pulse geometrically instead of visiting every pulse, so
its cost scales with the number of detections.  All randomness flows
through one ``numpy.random.Generator`` per run, making streams a
deterministic function of (parameters, seed).
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from ._kernels import prune_dead_time
from .model import DetectionParams, EmitterParams, ExcitationCW, ExcitationPulsed
from .stream import TelegraphTrace, TimeTagStream
from .units import PS_PER_NS, PS_PER_S, PS_PER_US

__all__ = [
    "sample_telegraph",
    "simulate_cw",
    "simulate_pulsed",
    "simulate_attenuated_laser",
    "apply_detection_chain",
    "skip_pulse_indices",
    "loop_pulse_indices",
]

# per-round sampling caps keep transient memory bounded; undershot
# intervals are continued exactly in the next round
_MAX_CHUNK = 4_000_000
_MAX_GROUP_BUDGET = 8_000_000


def _as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def sample_telegraph(emitter: EmitterParams, duration: int,
                     seed) -> TelegraphTrace:
    """Sample an on/off telegraph trace over ``[0, duration)`` ticks.

    Dwell times are independent exponentials with means ``t_on_mean`` /
    ``t_off_mean``; the initial state is drawn from the stationary
    distribution, so (by memorylessness) the trace is stationary.
    ``seed`` may be an integer or a ``numpy.random.Generator``.
    """
    if duration <= 0:
        raise ValueError("duration must be > 0")
    rng = _as_rng(seed)
    scale_on = emitter.t_on_mean * PS_PER_US
    scale_off = emitter.t_off_mean * PS_PER_US
    first_on = rng.random() < scale_on / (scale_on + scale_off)

    scale_a, scale_b = (scale_on, scale_off) if first_on else (scale_off, scale_on)
    mean_pair = scale_on + scale_off
    blocks = []
    total = 0.0
    while total < duration:
        n = max(int((duration - total) / mean_pair * 1.1) + 16, 16)
        block = np.empty(2 * n)
        block[0::2] = rng.exponential(scale_a, n)
        block[1::2] = rng.exponential(scale_b, n)
        blocks.append(block)
        total += block.sum()

    cum = np.cumsum(np.concatenate(blocks))
    inner = np.rint(cum[cum < duration]).astype(np.int64)
    bounds = np.concatenate(([0], inner, [duration]))
    lengths = np.diff(bounds)
    states = (np.arange(lengths.size) % 2 == 1) ^ first_on

    # rounding can produce zero-length dwells; drop them and re-merge
    # runs of equal state so the trace stays strictly alternating
    keep = lengths > 0
    states, seg_ends = states[keep], bounds[1:][keep]
    change = np.concatenate((states[1:] != states[:-1], [True]))
    boundaries = np.concatenate(([0], seg_ends[change]))
    return TelegraphTrace(duration=duration, boundaries=boundaries,
                          first_state_on=bool(states[0]))


def _renewal_epochs(starts: np.ndarray, lengths: np.ndarray, scale_pump: float,
                    scale_rad: float, rng: np.random.Generator) -> np.ndarray:
    """Emission epochs (ticks, float64, sorted) of a renewal process with
    inter-emission delay Exp(scale_pump)+Exp(scale_rad), restarted at the
    start of each interval and truncated at its end."""
    mean_delay = scale_pump + scale_rad
    cur_starts = starts.astype(np.float64)
    cur_lens = lengths.astype(np.float64)
    out = []
    while cur_starts.size:
        lam = cur_lens / mean_delay
        budgets = np.minimum(
            np.ceil(lam + 6.0 * np.sqrt(lam) + 8.0), _MAX_GROUP_BUDGET
        ).astype(np.int64)
        next_starts = []
        next_lens = []
        # slab the intervals so each sampling round stays within the
        # memory cap; a single oversized interval runs alone
        cum_budget = np.cumsum(budgets)
        slab_edges = [0]
        while slab_edges[-1] < budgets.size:
            lo = slab_edges[-1]
            base = cum_budget[lo - 1] if lo else 0
            hi = int(np.searchsorted(cum_budget, base + _MAX_CHUNK, side="left")) + 1
            slab_edges.append(min(max(hi, lo + 1), budgets.size))
        for lo, hi in zip(slab_edges[:-1], slab_edges[1:]):
            n = budgets[lo:hi]
            group_start = np.concatenate(([0], np.cumsum(n)[:-1]))
            total = int(n.sum())
            delays = rng.exponential(scale_pump, total)
            delays += rng.exponential(scale_rad, total)
            cs = np.cumsum(delays)
            base = cs[group_start] - delays[group_start]
            rel = cs - np.repeat(base, n)
            l_rep = np.repeat(cur_lens[lo:hi], n)
            keep = rel < l_rep
            out.append(np.repeat(cur_starts[lo:hi], n)[keep] + rel[keep])
            # groups whose final budgeted delay still landed inside the
            # interval may hold further emissions: continue them exactly
            last = group_start + n - 1
            under = keep[last]
            if np.any(under):
                rel_last = rel[last][under]
                next_starts.append(cur_starts[lo:hi][under] + rel_last)
                next_lens.append(cur_lens[lo:hi][under] - rel_last)
        cur_starts = np.concatenate(next_starts) if next_starts else np.empty(0)
        cur_lens = np.concatenate(next_lens) if next_lens else np.empty(0)
    if not out:
        return np.empty(0)
    return np.sort(np.concatenate(out))


def _poisson_times(rate_cps: float, duration: int,
                   rng: np.random.Generator) -> np.ndarray:
    lam = rate_cps * duration / PS_PER_S
    n = rng.poisson(lam)
    return rng.integers(0, duration, n).astype(np.float64)


def _detection_chain(epochs: np.ndarray, det: DetectionParams, duration: int,
                     rng: np.random.Generator, thin: bool):
    """Thinning, routing, background, jitter, re-sort, dead-time pruning.

    ``epochs`` are emission times in ticks (float64, sorted).  Returns
    (channels, timestamps) merged into global time order.
    """
    if thin:
        epochs = epochs[rng.random(epochs.size) < det.overall_efficiency]
    to_ch1 = rng.random(epochs.size) < det.splitter_ratio
    per_channel = []
    times = [epochs[to_ch1], epochs[~to_ch1]]
    for ch_times in times:
        if det.background_rate > 0:
            ch_times = np.concatenate(
                (ch_times, _poisson_times(det.background_rate, duration, rng))
            )
        if det.jitter_sigma > 0:
            ch_times = ch_times + rng.normal(0.0, det.jitter_sigma, ch_times.size)
        ticks = np.rint(ch_times).astype(np.int64)
        ticks = np.sort(ticks[(ticks >= 0) & (ticks < duration)])
        min_sep = max(int(round(det.dead_time * PS_PER_NS)), 1)
        per_channel.append(ticks[prune_dead_time(ticks, np.int64(min_sep))])
    t1, t2 = per_channel
    channels = np.concatenate(
        (np.ones(t1.size, np.uint8), np.full(t2.size, 2, np.uint8))
    )
    timestamps = np.concatenate((t1, t2))
    order = np.lexsort((channels, timestamps))
    return channels[order], timestamps[order].astype(np.uint64)


def _provenance(kind: str, det: DetectionParams, seed, emitter=None,
                excitation=None, **extra):
    meta = {"kind": kind, "detection": dataclasses.asdict(det)}
    if emitter is not None:
        meta["emitter"] = dataclasses.asdict(emitter)
    if excitation is not None:
        meta["excitation"] = dataclasses.asdict(excitation)
    meta.update(extra)
    return meta


def apply_detection_chain(emission_epochs, det: DetectionParams, duration: int,
                          seed) -> TimeTagStream:
    """Pass sorted emission epochs (ticks) through the detection chain."""
    epochs = np.asarray(emission_epochs, dtype=np.float64)
    if np.any(np.diff(epochs) < 0):
        raise ValueError("emission epochs must be sorted")
    if epochs.size and (epochs[0] < 0 or epochs[-1] >= duration):
        raise ValueError("emission epochs must lie within [0, duration)")
    rng = np.random.default_rng(seed)
    ch, ts = _detection_chain(epochs, det, duration, rng, thin=True)
    return TimeTagStream(duration=duration, channels=ch, timestamps=ts,
                         seed=_seed_int(seed),
                         metadata=_provenance("detection_chain", det, seed))


def _seed_int(seed) -> int:
    return int(seed) if isinstance(seed, (int, np.integer)) else 0


def simulate_cw(emitter: EmitterParams, exc: ExcitationCW, det: DetectionParams,
                duration: int, seed) -> TimeTagStream:
    """Simulate a cw-excited blinking emitter plus background.

    During emitting periods the photon epochs form a renewal process whose
    inter-emission delay is the sum of an exponential pump delay (rate =
    pump term of the decay-rate law) and an exponential radiative delay
    (rate = 1/radiative_lifetime); dark periods emit nothing.
    """
    if duration < PS_PER_US:
        raise ValueError("duration must be at least 1 us of ticks")
    rng = np.random.default_rng(seed)
    trace = sample_telegraph(emitter, duration, rng)
    pump_rate = emitter.pump_coefficient * exc.power / 1e3  # ns^-1
    if pump_rate > 0:
        on_starts, on_ends = trace.on_intervals()
        epochs = _renewal_epochs(
            on_starts.astype(np.int64), (on_ends - on_starts).astype(np.int64),
            PS_PER_NS / pump_rate, emitter.radiative_lifetime * PS_PER_NS, rng,
        )
    else:
        epochs = np.empty(0)
    ch, ts = _detection_chain(epochs, det, duration, rng, thin=True)
    meta = _provenance("cw", det, seed, emitter=emitter, excitation=exc)
    return TimeTagStream(duration=duration, channels=ch, timestamps=ts,
                         seed=_seed_int(seed), metadata=meta)


def _on_pulse_ranges(trace: TelegraphTrace, theta: int, n_pulses: int):
    """Global pulse-index ranges [a, b) that fall inside emitting periods."""
    on_starts, on_ends = trace.on_intervals()
    a = -(-on_starts.astype(np.int64) // theta)  # ceil division
    b = -(-on_ends.astype(np.int64) // theta)
    b = np.minimum(b, n_pulses)
    keep = b > a
    return a[keep], b[keep]


def skip_pulse_indices(trace: TelegraphTrace, theta: int, n_pulses: int,
                       p: float, rng=None, gaps=None) -> np.ndarray:
    """Event-skipping sampler of emitting pulse indices.

    Within emitting periods every pulse fires independently with
    probability ``p``; dark-period pulses never fire.  Instead of visiting
    each pulse, successive firing pulses are located by geometric gaps in
    the space of emitting-pulse ordinals and mapped back to global pulse
    indices, so the cost is proportional to the number of firings plus the
    number of telegraph segments.

    ``gaps`` (failure run-lengths before each firing) may be supplied
    explicitly in place of ``rng`` draws; the per-pulse loop oracle fed the
    same decision sequence must produce identical indices.
    """
    a, b = _on_pulse_ranges(trace, theta, n_pulses)
    offsets = np.concatenate(([0], np.cumsum(b - a)))
    m_total = int(offsets[-1])
    if m_total == 0 or p <= 0.0:
        return np.empty(0, dtype=np.int64)
    if gaps is not None:
        pos = np.cumsum(np.asarray(gaps, dtype=np.int64) + 1)
    else:
        expected = m_total * p
        est = min(int(expected + 6.0 * math.sqrt(expected + 1.0) + 16),
                  _MAX_GROUP_BUDGET)
        chunks = []
        last = 0
        while last < m_total:
            c = last + np.cumsum(rng.geometric(p, est))
            chunks.append(c)
            last = int(c[-1])
        pos = np.concatenate(chunks)
    ordinals = pos[pos <= m_total] - 1
    seg = np.searchsorted(offsets, ordinals, side="right") - 1
    return a[seg] + (ordinals - offsets[seg])


def loop_pulse_indices(trace: TelegraphTrace, theta: int, n_pulses: int,
                       p: float, rng=None, decisions=None) -> np.ndarray:
    """Per-pulse loop oracle for :func:`skip_pulse_indices`.

    Visits every pulse; cost is proportional to the pulse count.  With
    ``decisions`` (one pre-drawn bool per pulse: would this pulse fire if
    emitting?) the output is an exact reference for the skipping sampler.
    """
    starts, ends = trace.on_intervals()
    starts = starts.astype(np.int64)
    ends = ends.astype(np.int64)
    out = []
    seg = 0
    n_seg = starts.size
    for k in range(n_pulses):
        t = k * theta
        while seg < n_seg and ends[seg] <= t:
            seg += 1
        if seg >= n_seg or t < starts[seg]:
            continue
        fired = decisions[k] if decisions is not None else rng.random() < p
        if fired:
            out.append(k)
    return np.asarray(out, dtype=np.int64)


def simulate_pulsed(emitter: EmitterParams, exc: ExcitationPulsed,
                    det: DetectionParams, duration: int, seed) -> TimeTagStream:
    """Simulate a pulsed-excited blinking emitter plus background.

    Each pulse arriving in an emitting period promotes the emitter with
    probability ``excitation_prob`` and at most one photon is emitted,
    delayed by an exponential with the radiative lifetime.  Detection
    thinning is folded into the geometric pulse skipping, so runtime
    scales with the number of detections rather than pulses.
    """
    if exc.rep_period <= 10.0 * emitter.radiative_lifetime:
        raise ValueError(
            "rep_period must exceed 10x the radiative lifetime for the "
            "one-photon-per-pulse approximation"
        )
    theta = int(round(exc.rep_period * PS_PER_NS))
    if duration < theta:
        raise ValueError("duration must cover at least one pulse period")
    rng = np.random.default_rng(seed)
    trace = sample_telegraph(emitter, duration, rng)
    n_pulses = -(-duration // theta)
    p_eff = exc.excitation_prob * det.overall_efficiency
    idx = skip_pulse_indices(trace, theta, n_pulses, p_eff, rng=rng)
    delays = rng.exponential(emitter.radiative_lifetime * PS_PER_NS, idx.size)
    epochs = np.sort(idx.astype(np.float64) * theta + delays)
    epochs = epochs[epochs < duration]
    ch, ts = _detection_chain(epochs, det, duration, rng, thin=False)
    meta = _provenance("pulsed", det, seed, emitter=emitter, excitation=exc,
                       theta_ticks=theta)
    return TimeTagStream(duration=duration, channels=ch, timestamps=ts,
                         seed=_seed_int(seed), metadata=meta)


def simulate_attenuated_laser(detected_rate: float, rep_period: float,
                              det: DetectionParams, duration: int,
                              seed) -> TimeTagStream:
    """Simulate pulsed attenuated-laser light: per-pulse photon numbers are
    Poissonian, giving the flat normalized-coincidence reference comb.

    ``detected_rate`` is the target total detected rate (counts/s, both
    channels, before background and dead time); the chain applies routing,
    background, jitter and dead time but no further thinning.
    """
    if detected_rate < 0:
        raise ValueError("detected_rate must be >= 0")
    theta = int(round(rep_period * PS_PER_NS))
    if duration < theta:
        raise ValueError("duration must cover at least one pulse period")
    rng = np.random.default_rng(seed)
    n_pulses = -(-duration // theta)
    n_photons = rng.poisson(detected_rate * duration / PS_PER_S)
    idx = np.sort(rng.integers(0, n_pulses, n_photons))
    epochs = idx.astype(np.float64) * theta
    ch, ts = _detection_chain(epochs, det, duration, rng, thin=False)
    meta = _provenance("attenuated_laser", det, seed, theta_ticks=theta,
                       detected_rate=detected_rate)
    return TimeTagStream(duration=duration, channels=ch, timestamps=ts,
                         seed=_seed_int(seed), metadata=meta)
