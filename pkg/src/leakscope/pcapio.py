"""Classic pcap file reading and writing (Ethernet link type only).

Both byte orders are accepted on read; files are written little-endian with
the standard microsecond magic. pcapng is out of scope.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .wire import Frame, parse_frame, serialize_frame

PCAP_MAGIC = 0xA1B2C3D4
LINKTYPE_ETHERNET = 1
GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16


class PcapError(ValueError):
    pass


class BadMagicError(PcapError):
    pass


class TruncatedRecordError(PcapError):
    """File ended mid-record; .frames carries the count of full records read."""

    def __init__(self, frames: int):
        self.frames = frames
        super().__init__(f"pcap truncated after {frames} complete records")


@dataclass
class ReplayStats:
    records: int = 0
    malformed: int = 0
    first_ts: float | None = None
    last_ts: float | None = None


def write_pcap(path: str | Path, frames: Iterable[Frame], snaplen: int = 65535) -> int:
    """Write frames with their timestamps; returns the record count."""
    count = 0
    with open(path, "wb") as fh:
        fh.write(struct.pack("<IHHiIII", PCAP_MAGIC, 2, 4, 0, 0, snaplen, LINKTYPE_ETHERNET))
        for frame in frames:
            data = serialize_frame(frame)
            sec = int(frame.ts)
            usec = int(round((frame.ts - sec) * 1_000_000))
            if usec == 1_000_000:
                sec, usec = sec + 1, 0
            fh.write(struct.pack("<IIII", sec, usec, len(data), len(data)))
            fh.write(data)
            count += 1
    return count


def read_pcap_records(path: str | Path) -> Iterator[tuple[float, bytes]]:
    """Yield (timestamp, captured bytes) per record, handling either endianness."""
    with open(path, "rb") as fh:
        header = fh.read(GLOBAL_HEADER_LEN)
        if len(header) < GLOBAL_HEADER_LEN:
            raise BadMagicError("file too short for a pcap header")
        (magic,) = struct.unpack_from("<I", header, 0)
        if magic == PCAP_MAGIC:
            order = "<"
        elif struct.unpack_from(">I", header, 0)[0] == PCAP_MAGIC:
            order = ">"
        else:
            raise BadMagicError(f"not a classic pcap file (magic {magic:#010x})")
        linktype = struct.unpack_from(f"{order}I", header, 20)[0]
        if linktype != LINKTYPE_ETHERNET:
            raise PcapError(f"unsupported link type {linktype}; expected Ethernet")
        records = 0
        while True:
            rec = fh.read(RECORD_HEADER_LEN)
            if not rec:
                return
            if len(rec) < RECORD_HEADER_LEN:
                raise TruncatedRecordError(records)
            sec, usec, incl_len, _orig_len = struct.unpack(f"{order}IIII", rec)
            data = fh.read(incl_len)
            if len(data) < incl_len:
                raise TruncatedRecordError(records)
            records += 1
            yield sec + usec / 1_000_000, data


def replay_pcap(path: str | Path, stats: ReplayStats | None = None) -> Iterator[Frame]:
    """Yield parsed frames with original timestamps; short records are counted, not yielded."""
    for ts, data in read_pcap_records(path):
        if stats is not None:
            stats.records += 1
            if stats.first_ts is None:
                stats.first_ts = ts
            stats.last_ts = ts
        frame = parse_frame(data, ts=ts)
        if frame is None:
            if stats is not None:
                stats.malformed += 1
            continue
        yield frame
