"""pcap reader/writer behavior: round trips, endianness, damage handling."""

import struct

import pytest

from leakscope.netmodel import MacAddr
from leakscope.pcapio import (
    BadMagicError,
    PcapError,
    ReplayStats,
    TruncatedRecordError,
    read_pcap_records,
    replay_pcap,
    write_pcap,
)
from leakscope.wire import Frame, serialize_frame


def _frames(n=5):
    return [
        Frame(
            dst_mac=MacAddr(bytes([i] * 6)),
            src_mac=MacAddr(bytes([i + 1] * 6)),
            ethertype=0x0800,
            payload=bytes([i]) * (20 + i),
            ts=100.0 + i + i / 1000,
        )
        for i in range(n)
    ]


def test_write_read_round_trip(tmp_path):
    path = tmp_path / "t.pcap"
    frames = _frames()
    assert write_pcap(path, frames) == len(frames)
    back = list(replay_pcap(path))
    assert back == frames


def test_big_endian_file_reads(tmp_path):
    data = serialize_frame(_frames(1)[0])
    path = tmp_path / "be.pcap"
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 1))
        fh.write(struct.pack(">IIII", 42, 500000, len(data), len(data)))
        fh.write(data)
    records = list(read_pcap_records(path))
    assert records == [(42.5, data)]


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.pcap"
    path.write_bytes(b"\xde\xad\xbe\xef" + b"\x00" * 20)
    with pytest.raises(BadMagicError):
        list(read_pcap_records(path))
    path.write_bytes(b"\x01\x02")
    with pytest.raises(BadMagicError):
        list(read_pcap_records(path))


def test_non_ethernet_linktype_rejected(tmp_path):
    path = tmp_path / "lt.pcap"
    path.write_bytes(struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 101))
    with pytest.raises(PcapError):
        list(read_pcap_records(path))


def test_header_only_file_is_empty_not_error(tmp_path):
    path = tmp_path / "empty.pcap"
    write_pcap(path, [])
    assert list(replay_pcap(path)) == []


def test_truncated_record_reports_full_count(tmp_path):
    path = tmp_path / "trunc.pcap"
    frames = _frames(3)
    write_pcap(path, frames)
    whole = path.read_bytes()
    path.write_bytes(whole[:-5])
    stats = ReplayStats()
    got = []
    with pytest.raises(TruncatedRecordError) as err:
        for frame in replay_pcap(path, stats):
            got.append(frame)
    assert err.value.frames == 2
    assert got == frames[:2]
    assert stats.records == 2


def test_short_ethernet_record_counts_malformed(tmp_path):
    path = tmp_path / "short.pcap"
    runt = Frame(MacAddr(b"\x01" * 6), MacAddr(b"\x02" * 6), 0x0800, b"", ts=1.0)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 1))
        fh.write(struct.pack("<IIII", 1, 0, 5, 5))
        fh.write(b"\x00" * 5)
        data = serialize_frame(runt)
        fh.write(struct.pack("<IIII", 2, 0, len(data), len(data)))
        fh.write(data)
    stats = ReplayStats()
    frames = list(replay_pcap(path, stats))
    assert stats.records == 2 and stats.malformed == 1
    assert frames == [Frame(runt.dst_mac, runt.src_mac, 0x0800, b"", ts=2.0)]


def test_replay_is_deterministic(tmp_path):
    path = tmp_path / "d.pcap"
    write_pcap(path, _frames(8))
    assert list(replay_pcap(path)) == list(replay_pcap(path))
