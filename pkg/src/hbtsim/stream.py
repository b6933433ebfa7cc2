"""Time-tag stream and telegraph-trace containers.

A :class:`TimeTagStream` is the universal exchange object: two channels
of strictly increasing integer timestamps (picosecond ticks) plus the
seed and parameter provenance of the run that produced it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .units import PS_PER_S

__all__ = ["TimeTagStream", "TelegraphTrace", "validate_stream"]


@dataclass(frozen=True)
class TimeTagStream:
    """Channel-labelled detection timestamps at fixed tick resolution.

    ``channels`` holds 1 or 2 per record; ``timestamps`` is in ticks and
    globally sorted (ties broken by channel).  Within each channel the
    timestamps are strictly increasing and respect the detector dead time
    of the run that produced them.
    """

    duration: int
    channels: np.ndarray
    timestamps: np.ndarray
    seed: int = 0
    resolution_ps: int = 1
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "channels",
                           np.ascontiguousarray(self.channels, dtype=np.uint8))
        object.__setattr__(self, "timestamps",
                           np.ascontiguousarray(self.timestamps, dtype=np.uint64))
        if self.channels.shape != self.timestamps.shape:
            raise ValueError("channels and timestamps must have equal length")

    def __len__(self) -> int:
        return self.timestamps.size

    def channel_times(self, channel: int) -> np.ndarray:
        """Timestamps (ticks) of one channel, sorted ascending."""
        return self.timestamps[self.channels == channel]

    @property
    def duration_seconds(self) -> float:
        return self.duration * self.resolution_ps / PS_PER_S

    def rates(self) -> tuple[float, float]:
        """Measured (channel 1, channel 2) count rates in counts/s."""
        t = self.duration_seconds
        n1 = int(np.count_nonzero(self.channels == 1))
        n2 = len(self) - n1
        return n1 / t, n2 / t


def validate_stream(stream: TimeTagStream, dead_time_ticks: int = 0) -> None:
    """Check the stream invariants; raise ``ValueError`` on violation.

    Verifies channel labels, global sort order, timestamps within
    ``[0, duration)``, strict per-channel monotonicity, and (when
    ``dead_time_ticks`` > 0) the per-channel minimum separation.
    """
    ch, ts = stream.channels, stream.timestamps
    if ch.size == 0:
        return
    bad = ~np.isin(ch, (1, 2))
    if np.any(bad):
        raise ValueError(f"invalid channel labels: {np.unique(ch[bad])}")
    if np.any(ts >= stream.duration):
        raise ValueError("timestamps must be < duration")
    if np.any(np.diff(ts.astype(np.int64)) < 0):
        raise ValueError("records must be in global time order")
    min_sep = max(int(dead_time_ticks), 1)
    for channel in (1, 2):
        t = stream.channel_times(channel).astype(np.int64)
        if t.size > 1 and np.any(np.diff(t) < min_sep):
            raise ValueError(
                f"channel {channel} violates the {min_sep}-tick minimum separation"
            )


@dataclass(frozen=True)
class TelegraphTrace:
    """Alternating on/off state history covering ``[0, duration)``.

    Stored compactly as segment boundaries ``0 = b_0 < b_1 < ... < b_n =
    duration`` plus the state of the first segment; segment ``i`` spans
    ``[b_i, b_{i+1})`` and the states alternate.
    """

    duration: int
    boundaries: np.ndarray
    first_state_on: bool

    def __post_init__(self):
        b = np.ascontiguousarray(self.boundaries, dtype=np.uint64)
        object.__setattr__(self, "boundaries", b)
        if b.size < 2 or b[0] != 0 or b[-1] != self.duration:
            raise ValueError("boundaries must run from 0 to duration")
        if np.any(np.diff(b.astype(np.int64)) <= 0):
            raise ValueError("boundaries must be strictly increasing")

    @property
    def n_segments(self) -> int:
        return self.boundaries.size - 1

    @property
    def starts(self) -> np.ndarray:
        return self.boundaries[:-1]

    @property
    def ends(self) -> np.ndarray:
        return self.boundaries[1:]

    @property
    def states(self) -> np.ndarray:
        """Boolean per segment, True while emitting."""
        odd = np.arange(self.n_segments) % 2 == 1
        return odd ^ self.first_state_on

    def on_intervals(self) -> tuple[np.ndarray, np.ndarray]:
        """(starts, ends) in ticks of the emitting segments."""
        on = self.states
        return self.starts[on], self.ends[on]

    def on_fraction(self) -> float:
        starts, ends = self.on_intervals()
        return float((ends - starts).sum()) / self.duration
