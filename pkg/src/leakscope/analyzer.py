"""Per-device traffic accounting and endpoint attribution.

Only headers are interpreted: Ethernet, IPv4, UDP/TCP, DNS answer records,
and the TLS ClientHello up to the SNI extension. Application payloads are
never parsed. Remote endpoints resolve to hostnames via DNS answers and SNI
(SNI wins), fall back to the IP literal, and are checked against a tracker
blocklist at contact time.
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .discovery import DeviceRegistry
from .netmodel import DeviceId, DeviceTraffic, Ipv4Addr, TrafficSample, TrafficSnapshot
from .policy import PolicyStore
from .wire import (
    DNS_CLASS_IN,
    DNS_TYPE_A,
    ETHERTYPE_IPV4,
    PROTO_TCP,
    PROTO_UDP,
    Frame,
    parse_ipv4,
    parse_tcp,
    parse_udp,
)

RETENTION_SECONDS = 600

SOURCE_SNI = "sni"
SOURCE_DNS = "dns"
SOURCE_IP_LITERAL = "ip_literal"
_PRECEDENCE = {SOURCE_IP_LITERAL: 0, SOURCE_DNS: 1, SOURCE_SNI: 2}


@dataclass(frozen=True)
class HostnameBinding:
    device: DeviceId
    remote_ip: Ipv4Addr
    hostname: str
    source: str
    observed_at: int


@dataclass(frozen=True)
class Blocklist:
    domains: frozenset[str]

    @classmethod
    def from_lines(cls, lines) -> "Blocklist":
        domains = set()
        for raw in lines:
            entry = raw.split("#", 1)[0].strip().lower().lstrip(".")
            if entry:
                domains.add(entry)
        return cls(frozenset(domains))


def load_blocklist(path: str | Path) -> Blocklist:
    return Blocklist.from_lines(Path(path).read_text().splitlines())


def match_tracker(hostname: str, blocklist: Blocklist) -> bool:
    """Suffix match on label boundaries only."""
    h = hostname.lower().rstrip(".")
    for domain in blocklist.domains:
        if h == domain or h.endswith("." + domain):
            return True
    return False


@dataclass(frozen=True)
class FlowKey:
    device: DeviceId
    remote_ip: Ipv4Addr
    protocol: int
    local_port: int
    remote_port: int


# --------------------------------------------------------------- DNS parsing

_MAX_NAME_JUMPS = 32
_MAX_NAME_LEN = 255


def _read_dns_name(data: bytes, pos: int) -> tuple[str, int] | None:
    """Decode a possibly compressed name; returns (name, next position after it)."""
    labels: list[str] = []
    jumps = 0
    next_pos: int | None = None
    total = 0
    while True:
        if pos >= len(data):
            return None
        n = data[pos]
        if n == 0:
            if next_pos is None:
                next_pos = pos + 1
            return ".".join(labels), next_pos
        if n & 0xC0 == 0xC0:
            if pos + 1 >= len(data):
                return None
            jumps += 1
            if jumps > _MAX_NAME_JUMPS:  # compression loop guard
                return None
            if next_pos is None:
                next_pos = pos + 2
            pos = ((n & 0x3F) << 8) | data[pos + 1]
            continue
        if n & 0xC0:
            return None
        if pos + 1 + n > len(data):
            return None
        total += n + 1
        if total > _MAX_NAME_LEN:
            return None
        labels.append(data[pos + 1:pos + 1 + n].decode("ascii", "replace"))
        pos += 1 + n


def parse_dns_response(payload: bytes) -> list[tuple[str, Ipv4Addr]] | None:
    """A-record answers as (hostname, ip); hostname is the query name when present.

    Returns None for malformed messages (truncation, compression loops).
    """
    if len(payload) < 12:
        return None
    _txid, flags, qdcount, ancount = struct.unpack_from("!HHHH", payload, 0)
    if not flags & 0x8000:  # not a response
        return None
    pos = 12
    qname: str | None = None
    for _ in range(qdcount):
        decoded = _read_dns_name(payload, pos)
        if decoded is None:
            return None
        name, pos = decoded
        if pos + 4 > len(payload):
            return None
        if qname is None:
            qname = name
        pos += 4
    results: list[tuple[str, Ipv4Addr]] = []
    for _ in range(ancount):
        decoded = _read_dns_name(payload, pos)
        if decoded is None:
            return None
        owner, pos = decoded
        if pos + 10 > len(payload):
            return None
        rtype, rclass, _ttl, rdlength = struct.unpack_from("!HHIH", payload, pos)
        pos += 10
        if pos + rdlength > len(payload):
            return None
        if rtype == DNS_TYPE_A and rclass == DNS_CLASS_IN and rdlength == 4:
            results.append((qname if qname else owner, Ipv4Addr(payload[pos:pos + 4])))
        pos += rdlength
    return results


# --------------------------------------------------------- TLS SNI extraction

def parse_client_hello_sni(data: bytes) -> str | None:
    """SNI hostname from a TLS ClientHello at the head of a TCP stream.

    None when the bytes are not a ClientHello or carry no SNI; raises
    ValueError when they claim to be one but the lengths are inconsistent.
    """
    if len(data) < 5 or data[0] != 0x16 or data[1] != 0x03:
        return None
    (record_len,) = struct.unpack_from("!H", data, 3)
    if 5 + record_len > len(data):
        raise ValueError("TLS record truncated")
    hs = data[5:5 + record_len]
    if not hs or hs[0] != 0x01:
        return None
    if len(hs) < 4:
        raise ValueError("handshake header truncated")
    hs_len = int.from_bytes(hs[1:4], "big")
    if 4 + hs_len > len(hs):
        raise ValueError("handshake length exceeds record")
    body = hs[4:4 + hs_len]
    try:
        pos = 2 + 32  # client_version + random
        session_len = body[pos]
        pos += 1 + session_len
        (cipher_len,) = struct.unpack_from("!H", body, pos)
        pos += 2 + cipher_len
        comp_len = body[pos]
        pos += 1 + comp_len
        if pos == len(body):
            return None  # legal: no extensions block at all
        (ext_total,) = struct.unpack_from("!H", body, pos)
        pos += 2
        end = pos + ext_total
        if end > len(body):
            raise ValueError("extensions length exceeds body")
        while pos + 4 <= end:
            ext_type, ext_len = struct.unpack_from("!HH", body, pos)
            pos += 4
            if pos + ext_len > end:
                raise ValueError("extension overruns extensions block")
            if ext_type == 0x0000:
                return _server_name(body[pos:pos + ext_len])
            pos += ext_len
        return None
    except (IndexError, struct.error) as exc:
        raise ValueError("ClientHello truncated mid-structure") from exc


def _server_name(ext: bytes) -> str | None:
    if len(ext) < 2:
        raise ValueError("server_name extension too short")
    (list_len,) = struct.unpack_from("!H", ext, 0)
    pos = 2
    end = 2 + list_len
    if end > len(ext):
        raise ValueError("server_name list overruns extension")
    while pos + 3 <= end:
        name_type = ext[pos]
        (name_len,) = struct.unpack_from("!H", ext, pos + 1)
        pos += 3
        if pos + name_len > end:
            raise ValueError("server_name entry overruns list")
        if name_type == 0:
            return ext[pos:pos + name_len].decode("ascii", "replace")
        pos += name_len
    return None


# ------------------------------------------------------------- counter store

class _DeviceCounters:
    def __init__(self):
        self.buckets: dict[int, list[int]] = {}  # second → [out, in]
        self.total_out = 0
        self.total_in = 0
        self.tracker_hosts: set[str] = set()


class CounterStore:
    """Single-writer accounting state; snapshot() hands out immutable copies."""

    def __init__(self, retention: int = RETENTION_SECONDS):
        self.retention = retention
        self._devices: dict[DeviceId, _DeviceCounters] = {}
        self._bindings: dict[tuple[DeviceId, Ipv4Addr], HostnameBinding] = {}
        self._sni_attempted: set[FlowKey] = set()
        self.frames_seen = 0
        self.frames_attributed = 0
        self.parse_errors = 0
        self._lock = threading.Lock()

    def _counters(self, device: DeviceId) -> _DeviceCounters:
        counters = self._devices.get(device)
        if counters is None:
            counters = self._devices[device] = _DeviceCounters()
        return counters

    def add_bytes(self, device: DeviceId, outbound: bool, n: int, now: float) -> None:
        with self._lock:
            counters = self._counters(device)
            bucket = counters.buckets.setdefault(int(now), [0, 0])
            bucket[0 if outbound else 1] += n
            if outbound:
                counters.total_out += n
            else:
                counters.total_in += n
            self._prune(counters, now)

    def _prune(self, counters: _DeviceCounters, now: float) -> None:
        floor = int(now) - self.retention
        if len(counters.buckets) > self.retention:
            for sec in [s for s in counters.buckets if s <= floor]:
                del counters.buckets[sec]

    def bind(self, device: DeviceId, remote_ip: Ipv4Addr, hostname: str, source: str,
             now: float) -> HostnameBinding:
        """Upsert honoring precedence sni > dns > ip_literal; ties go to the newcomer."""
        key = (device, remote_ip)
        with self._lock:
            current = self._bindings.get(key)
            if current is not None and _PRECEDENCE[source] < _PRECEDENCE[current.source]:
                return current
            binding = HostnameBinding(device, remote_ip, hostname, source, int(now))
            self._bindings[key] = binding
            return binding

    def resolve(self, device: DeviceId, remote_ip: Ipv4Addr) -> HostnameBinding | None:
        with self._lock:
            return self._bindings.get((device, remote_ip))

    def note_tracker(self, device: DeviceId, hostname: str) -> None:
        with self._lock:
            self._counters(device).tracker_hosts.add(hostname)

    def sni_already_attempted(self, flow: FlowKey) -> bool:
        with self._lock:
            if flow in self._sni_attempted:
                return True
            self._sni_attempted.add(flow)
            return False

    def totals(self, device: DeviceId) -> tuple[int, int]:
        with self._lock:
            counters = self._devices.get(device)
            return (counters.total_out, counters.total_in) if counters else (0, 0)

    def tracker_hosts(self, device: DeviceId) -> set[str]:
        with self._lock:
            counters = self._devices.get(device)
            return set(counters.tracker_hosts) if counters else set()

    def series(self, device: DeviceId, now: float) -> tuple[TrafficSample, ...]:
        with self._lock:
            counters = self._devices.get(device)
            if counters is None:
                return ()
            floor = int(now) - self.retention
            return tuple(TrafficSample(sec, out, inn)
                         for sec, (out, inn) in sorted(counters.buckets.items())
                         if sec > floor)


# -------------------------------------------------------------------- ingest

def ingest(frame: Frame, registry: DeviceRegistry, blocklist: Blocklist,
           store: CounterStore, clock) -> None:
    """Account one captured frame; headers only, payload bytes never interpreted."""
    now = clock()
    store.frames_seen += 1
    if frame.ethertype != ETHERTYPE_IPV4:
        return
    header = parse_ipv4(frame.payload)
    if header is None:
        store.parse_errors += 1
        return

    src_device = registry.by_mac(frame.src_mac) or registry.by_ip(header.src_ip)
    dst_device = registry.by_mac(frame.dst_mac) or registry.by_ip(header.dst_ip)
    if dst_device is not None and dst_device.ip != header.dst_ip:
        # MAC matched the analyzer-side rewrite target, not the real endpoint
        dst_device = registry.by_ip(header.dst_ip)

    attributed = False
    if src_device is not None:
        store.add_bytes(src_device.device_id, True, header.total_length, now)
        attributed = True
    if dst_device is not None and (src_device is None or dst_device.device_id != src_device.device_id):
        store.add_bytes(dst_device.device_id, False, header.total_length, now)
        attributed = True
    if attributed:
        store.frames_attributed += 1

    # hostname intelligence from DNS answers and the ClientHello SNI
    if header.protocol == PROTO_UDP:
        dg = parse_udp(header.payload)
        if dg is None:
            store.parse_errors += 1
        elif dg.src_port == 53 and dst_device is not None:
            answers = parse_dns_response(dg.payload)
            if answers is None:
                store.parse_errors += 1
            else:
                for hostname, ip in answers:
                    store.bind(dst_device.device_id, ip, hostname, SOURCE_DNS, now)
    elif header.protocol == PROTO_TCP and src_device is not None:
        seg = parse_tcp(header.payload)
        if seg is None:
            store.parse_errors += 1
        elif seg.payload:
            flow = FlowKey(src_device.device_id, header.dst_ip, PROTO_TCP,
                           seg.src_port, seg.dst_port)
            if not store.sni_already_attempted(flow):
                try:
                    sni = parse_client_hello_sni(seg.payload)
                except ValueError:
                    store.parse_errors += 1
                else:
                    if sni:
                        store.bind(src_device.device_id, header.dst_ip, sni, SOURCE_SNI, now)

    # tracker check at contact time, after any binding update from this frame
    if src_device is not None and not registry.is_lan_infrastructure(header.dst_ip):
        _check_tracker(store, blocklist, src_device.device_id, header.dst_ip, now)
    if dst_device is not None and not registry.is_lan_infrastructure(header.src_ip):
        _check_tracker(store, blocklist, dst_device.device_id, header.src_ip, now)


def _check_tracker(store: CounterStore, blocklist: Blocklist, device: DeviceId,
                   remote_ip: Ipv4Addr, now: float) -> None:
    binding = store.resolve(device, remote_ip)
    if binding is None:
        binding = store.bind(device, remote_ip, str(remote_ip), SOURCE_IP_LITERAL, now)
    if match_tracker(binding.hostname, blocklist):
        store.note_tracker(device, binding.hostname)


def snapshot(store: CounterStore, registry: DeviceRegistry, policy: PolicyStore,
             now: float) -> TrafficSnapshot:
    """Immutable point-in-time view: identity, block state, trackers, per-second series."""
    blocked = policy.blocked_set(now)
    entries = []
    for record in registry.devices():
        hosts = tuple(sorted(store.tracker_hosts(record.device_id)))
        entries.append(DeviceTraffic(
            device_id=record.device_id,
            name=record.name,
            vendor=record.vendor,
            mac=str(record.mac),
            ip=str(record.ip),
            blocked=record.device_id in blocked,
            tracker_count=len(hosts),
            tracker_hosts=hosts,
            series=store.series(record.device_id, now),
        ))
    return TrafficSnapshot(generated_at=int(now), devices=tuple(entries))
