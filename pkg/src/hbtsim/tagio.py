"""Bit-exact binary persistence of time-tag streams.

File layout (all integers little-endian):

====================  =====  ==========================================
field                 bytes  meaning
====================  =====  ==========================================
magic                 8      ``PHFTAG01``
resolution_ps         8      unsigned, ps per tick
duration_ticks        8      unsigned
record_count          8      unsigned
seed                  8      unsigned
metadata_length       4      unsigned, bytes of JSON that follow
metadata              var    UTF-8 JSON object (canonical: sorted keys)
records               9*N    per record: channel u8, timestamp u64
====================  =====  ==========================================

Records are stored in global time order.  ``read_timetags`` validates the
magic, the record count, channel labels, timestamp bounds and per-channel
strict monotonicity, raising a distinct error type per failure mode.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .stream import TimeTagStream

__all__ = [
    "MAGIC",
    "TimeTagFileError",
    "BadMagicError",
    "TruncatedFileError",
    "StreamFormatError",
    "write_timetags",
    "read_timetags",
]

MAGIC = b"PHFTAG01"
_HEADER = struct.Struct("<8sQQQQI")
_RECORD_DTYPE = np.dtype([("channel", "u1"), ("timestamp", "<u8")])


class TimeTagFileError(Exception):
    """Base class for time-tag file problems."""


class BadMagicError(TimeTagFileError):
    """The file does not start with the expected magic bytes."""


class TruncatedFileError(TimeTagFileError):
    """The file ends before the announced data does."""


class StreamFormatError(TimeTagFileError):
    """The decoded records violate the stream invariants."""


def write_timetags(stream: TimeTagStream, destination) -> int:
    """Write a stream to ``destination`` (path or binary file object);
    returns the number of bytes written.  ``read_timetags`` round-trips
    the result bit-identically."""
    meta = json.dumps(stream.metadata, sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
    header = _HEADER.pack(MAGIC, stream.resolution_ps, stream.duration,
                          len(stream), stream.seed & 0xFFFFFFFFFFFFFFFF,
                          len(meta))
    records = np.empty(len(stream), dtype=_RECORD_DTYPE)
    records["channel"] = stream.channels
    records["timestamp"] = stream.timestamps
    payload = header + meta + records.tobytes()
    if hasattr(destination, "write"):
        destination.write(payload)
    else:
        Path(destination).write_bytes(payload)
    return len(payload)


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedFileError(
            f"truncated {what}: expected {n} bytes, found {len(data)}")
    return data


def read_timetags(source) -> TimeTagStream:
    """Read and validate a time-tag file written by :func:`write_timetags`."""
    if hasattr(source, "read"):
        return _read_from(source)
    with open(source, "rb") as fh:
        return _read_from(fh)


def _read_from(fh) -> TimeTagStream:
    raw = _read_exact(fh, _HEADER.size, "header")
    magic, resolution, duration, count, seed, meta_len = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    meta_raw = _read_exact(fh, meta_len, "metadata block")
    try:
        metadata = json.loads(meta_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise StreamFormatError(f"metadata is not valid JSON: {exc}") from exc

    body = fh.read()
    if len(body) != count * _RECORD_DTYPE.itemsize:
        found = len(body) // _RECORD_DTYPE.itemsize
        raise TruncatedFileError(
            f"record section holds {found} records, header announces {count}")
    records = np.frombuffer(body, dtype=_RECORD_DTYPE)
    channels = records["channel"]
    timestamps = records["timestamp"]

    if np.any((channels != 1) & (channels != 2)):
        raise StreamFormatError("channel labels must be 1 or 2")
    if np.any(timestamps >= duration):
        raise StreamFormatError("timestamps must be below the duration")
    if count > 1 and np.any(np.diff(timestamps.astype(np.int64)) < 0):
        raise StreamFormatError("records must be in global time order")
    for channel in (1, 2):
        t = timestamps[channels == channel].astype(np.int64)
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise StreamFormatError(
                f"channel {channel} timestamps must be strictly increasing")

    return TimeTagStream(duration=int(duration), channels=channels.copy(),
                         timestamps=timestamps.copy(), seed=int(seed),
                         resolution_ps=int(resolution), metadata=metadata)
