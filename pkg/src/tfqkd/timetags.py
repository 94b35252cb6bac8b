"""Binary time-tag files.

Layout (little endian)::

    magic        8 bytes  b"TTAG\\x00\\r\\n\\x1a"
    version      uint16   (1)
    resolution   uint32   picoseconds per time unit (1)
    n_channels   uint8
    channels     n_channels x (uint8 id, 16-byte NUL-padded ASCII name)
    n_records    uint64
    records      n_records x (uint64 time, uint8 channel)

Records must be sorted by time; every channel must appear in the map.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .synth import EventStream

MAGIC = b"TTAG\x00\r\n\x1a"
VERSION = 1
RECORD = np.dtype([("time", "<u8"), ("channel", "u1")])
DEFAULT_CHANNELS = {0: "D0", 1: "D1"}


class TimetagError(ValueError):
    """Malformed or inconsistent time-tag file."""


def encode(times_ps, channels, channel_map: dict[int, str] | None = None) -> bytes:
    channel_map = DEFAULT_CHANNELS if channel_map is None else channel_map
    times = np.asarray(times_ps)
    chans = np.asarray(channels)
    if times.size and (times.min() < 0):
        raise TimetagError("times must be >= 0")
    if np.any(np.diff(times) < 0):
        i = int(np.flatnonzero(np.diff(times) < 0)[0]) + 1
        raise TimetagError(f"record {i} is out of time order")
    unknown = set(np.unique(chans).tolist()) - set(channel_map)
    if unknown:
        raise TimetagError(f"channels {sorted(unknown)} missing from channel map")
    head = [MAGIC, struct.pack("<HIB", VERSION, 1, len(channel_map))]
    for cid in sorted(channel_map):
        name = channel_map[cid].encode("ascii")
        if len(name) > 16:
            raise TimetagError(f"channel name {channel_map[cid]!r} longer than 16 bytes")
        head.append(struct.pack("<B16s", cid, name))
    head.append(struct.pack("<Q", times.size))
    rec = np.empty(times.size, dtype=RECORD)
    rec["time"] = times
    rec["channel"] = chans
    return b"".join(head) + rec.tobytes()


def decode(data: bytes) -> tuple[np.ndarray, np.ndarray, dict[int, str]]:
    if data[:8] != MAGIC:
        raise TimetagError("bad magic: not a time-tag file")
    pos = 8
    try:
        version, resolution, n_ch = struct.unpack_from("<HIB", data, pos)
        pos += 7
        if version != VERSION:
            raise TimetagError(f"unsupported version {version}")
        if resolution != 1:
            raise TimetagError(f"unsupported time resolution {resolution} ps")
        channel_map = {}
        for _ in range(n_ch):
            cid, name = struct.unpack_from("<B16s", data, pos)
            pos += 17
            channel_map[cid] = name.rstrip(b"\x00").decode("ascii")
        (n,) = struct.unpack_from("<Q", data, pos)
        pos += 8
    except struct.error:
        raise TimetagError("truncated header") from None
    need = pos + n * RECORD.itemsize
    if len(data) < need:
        raise TimetagError(f"truncated file: {n} records declared, {(len(data) - pos) // RECORD.itemsize} present")
    if len(data) > need:
        raise TimetagError("trailing bytes after the last record")
    rec = np.frombuffer(data, dtype=RECORD, count=n, offset=pos)
    times = rec["time"].astype(np.int64)
    chans = rec["channel"].copy()
    bad = np.flatnonzero(np.diff(times) < 0)
    if bad.size:
        raise TimetagError(f"record {int(bad[0]) + 1} is out of time order")
    unknown = set(np.unique(chans).tolist()) - set(channel_map)
    if unknown:
        raise TimetagError(f"records use undeclared channels {sorted(unknown)}")
    return times, chans, channel_map


def write_timetags(stream: EventStream, path: str | Path, channel_map: dict[int, str] | None = None) -> None:
    Path(path).write_bytes(encode(stream.times_ps, stream.detectors, channel_map))


def read_timetags(path: str | Path) -> EventStream:
    times, chans, _ = decode(Path(path).read_bytes())
    if np.any(chans > 1):
        raise TimetagError("detector channels must be 0 (D0) or 1 (D1)")
    return EventStream(times, chans)
