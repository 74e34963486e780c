"""Deterministic virtual LAN for exercising interception end to end.

Hosts keep real ARP caches, frames route purely by destination MAC, and every
emission lands in the delivery log as delivered or dropped, so tests can
account for every byte. External hosts sit behind the gateway on a
point-to-point WAN link; the gateway doubles as the DNS resolver, answering
queries for external hosts by their scenario names. There is no randomness
anywhere: the same scenario always produces the same log.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from pathlib import Path

from .netmodel import BROADCAST_MAC, Ipv4Addr, MacAddr
from .wire import (
    ARP_OP_REPLY,
    ARP_OP_REQUEST,
    ETHERTYPE_ARP,
    ETHERTYPE_IPV4,
    PROTO_TCP,
    PROTO_UDP,
    ArpPacket,
    Frame,
    arp_frame,
    build_client_hello,
    build_dns_query,
    build_dns_response,
    build_ipv4,
    build_tcp,
    build_udp,
    parse_arp,
    parse_dns_query,
    parse_ipv4,
    parse_tcp,
    parse_udp,
)

ROLE_DEVICE = "device"
ROLE_GATEWAY = "gateway"
ROLE_ANALYZER = "analyzer"
ROLE_EXTERNAL = "external"
ROLES = (ROLE_DEVICE, ROLE_GATEWAY, ROLE_ANALYZER, ROLE_EXTERNAL)

DEFAULT_ARP_TTL = 60.0
UDP_DATA_PORT = 4000
TCP_DATA_PORT = 8080
TLS_PORT = 443


class ScenarioError(ValueError):
    """Scenario file rejected; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass(frozen=True)
class HostSpec:
    name: str
    mac: MacAddr
    ip: Ipv4Addr
    role: str


@dataclass(frozen=True)
class ScriptedEvent:
    t: float
    host: str
    kind: str  # dns | tls | udp | tcp
    dst_ip: Ipv4Addr | None = None
    hostname: str | None = None
    sni: str | None = None
    size: int = 0


@dataclass(frozen=True)
class Scenario:
    hosts: tuple[HostSpec, ...]
    events: tuple[ScriptedEvent, ...]
    arp_ttl: float
    duration: float


def parse_scenario(text: str) -> Scenario:
    hosts: list[HostSpec] = []
    events: list[ScriptedEvent] = []
    names: dict[str, HostSpec] = {}
    seen_macs: set[MacAddr] = set()
    seen_ips: set[Ipv4Addr] = set()
    arp_ttl = DEFAULT_ARP_TTL
    duration: float | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        directive = fields[0]
        try:
            if directive == "host":
                if len(fields) != 5:
                    raise ScenarioError("host needs: host <name> <mac> <ip> <role>", lineno)
                name, mac_s, ip_s, role = fields[1:]
                if role not in ROLES:
                    raise ScenarioError(f"unknown role {role!r}", lineno)
                spec = HostSpec(name, MacAddr.parse(mac_s), Ipv4Addr(ip_s), role)
                if name in names:
                    raise ScenarioError(f"duplicate host name {name!r}", lineno)
                if spec.mac in seen_macs:
                    raise ScenarioError(f"duplicate mac {mac_s}", lineno)
                if spec.ip in seen_ips:
                    raise ScenarioError(f"duplicate ip {ip_s}", lineno)
                names[name] = spec
                seen_macs.add(spec.mac)
                seen_ips.add(spec.ip)
                hosts.append(spec)
            elif directive == "ttl":
                if len(fields) != 2:
                    raise ScenarioError("ttl needs one value", lineno)
                arp_ttl = float(fields[1])
                if arp_ttl <= 0:
                    raise ScenarioError("ttl must be positive", lineno)
            elif directive == "duration":
                if len(fields) != 2:
                    raise ScenarioError("duration needs one value", lineno)
                duration = float(fields[1])
                if duration < 0:
                    raise ScenarioError("duration must be >= 0", lineno)
            elif directive == "at":
                if len(fields) < 4:
                    raise ScenarioError("at needs: at <t> <host> <kind> ...", lineno)
                t = float(fields[1])
                if t < 0:
                    raise ScenarioError("event time must be >= 0", lineno)
                host_name, kind = fields[2], fields[3]
                spec = names.get(host_name)
                if spec is None:
                    raise ScenarioError(f"unknown host {host_name!r} (hosts must be declared first)", lineno)
                if spec.role != ROLE_DEVICE:
                    raise ScenarioError("events must originate from device hosts", lineno)
                args = fields[4:]
                if kind == "dns":
                    if len(args) != 1:
                        raise ScenarioError("dns needs: at <t> <host> dns <hostname>", lineno)
                    events.append(ScriptedEvent(t, host_name, "dns", hostname=args[0]))
                elif kind == "tls":
                    if len(args) != 3:
                        raise ScenarioError("tls needs: at <t> <host> tls <ip> <sni> <bytes>", lineno)
                    events.append(ScriptedEvent(t, host_name, "tls", dst_ip=Ipv4Addr(args[0]),
                                                sni=args[1], size=_size(args[2], lineno)))
                elif kind in ("udp", "tcp"):
                    if len(args) != 2:
                        raise ScenarioError(f"{kind} needs: at <t> <host> {kind} <ip> <bytes>", lineno)
                    events.append(ScriptedEvent(t, host_name, kind, dst_ip=Ipv4Addr(args[0]),
                                                size=_size(args[1], lineno)))
                else:
                    raise ScenarioError(f"unknown event kind {kind!r}", lineno)
            else:
                raise ScenarioError(f"unknown directive {directive!r}", lineno)
        except ScenarioError:
            raise
        except ValueError as exc:  # address/number parse failures get a line number
            raise ScenarioError(str(exc), lineno) from exc

    if sum(1 for h in hosts if h.role == ROLE_GATEWAY) != 1:
        raise ScenarioError("scenario needs exactly one gateway host")
    if sum(1 for h in hosts if h.role == ROLE_ANALYZER) > 1:
        raise ScenarioError("scenario allows at most one analyzer host")
    last_event = max((e.t for e in events), default=0.0)
    if duration is None:
        duration = last_event
    elif last_event > duration:
        raise ScenarioError("event time past declared duration")
    return Scenario(tuple(hosts), tuple(events), arp_ttl, duration)


def _size(text: str, lineno: int) -> int:
    n = int(text)
    if n < 0:
        raise ScenarioError("byte count must be >= 0", lineno)
    return n


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text())


@dataclass
class _CacheEntry:
    mac: MacAddr
    expires_at: float


class SimHost:
    """Runtime state for one scenario host."""

    def __init__(self, spec: HostSpec):
        self.name = spec.name
        self.mac = spec.mac
        self.ip = spec.ip
        self.role = spec.role
        self.arp_cache: dict[Ipv4Addr, _CacheEntry] = {}
        self.inbox: list[Frame] = []  # drained by the capture backend for the analyzer host
        self.pending: dict[Ipv4Addr, list[bytes]] = {}  # IP packets awaiting ARP resolution
        self.received: list[tuple[float, Ipv4Addr, int, int]] = []  # externals: (t, src_ip, proto, payload_len)
        self._next_port = 40000

    def take_port(self) -> int:
        self._next_port += 1
        return self._next_port


@dataclass(frozen=True)
class DeliveryRecord:
    t: float
    frame: Frame
    delivered_to: tuple[str, ...]  # empty tuple means the frame was dropped
    link: str  # "lan" or "wan"


class SimLan:
    """Event-driven LAN simulation; time only moves inside run_until/step."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.now = 0.0
        self.log: list[DeliveryRecord] = []
        self.hosts: dict[str, SimHost] = {s.name: SimHost(s) for s in scenario.hosts}
        self._lan_by_mac: dict[MacAddr, SimHost] = {}
        self._lan_by_ip: dict[Ipv4Addr, SimHost] = {}
        self._ext_by_ip: dict[Ipv4Addr, SimHost] = {}
        self._ext_by_name: dict[str, SimHost] = {}
        self.gateway: SimHost | None = None
        self.analyzer: SimHost | None = None
        for host in self.hosts.values():
            if host.role == ROLE_EXTERNAL:
                self._ext_by_ip[host.ip] = host
                self._ext_by_name[host.name.lower()] = host
                continue
            self._lan_by_mac[host.mac] = host
            self._lan_by_ip[host.ip] = host
            if host.role == ROLE_GATEWAY:
                self.gateway = host
            elif host.role == ROLE_ANALYZER:
                self.analyzer = host
        self._queue: list = []
        self._seq = itertools.count()
        self._txid = itertools.count(1)
        for ev in scenario.events:
            self._schedule(ev.t, lambda ev=ev: self._fire(ev))

    # ------------------------------------------------------------ time control

    def _schedule(self, t: float, fn) -> None:
        heapq.heappush(self._queue, (t, next(self._seq), fn))

    def run_until(self, t_stop: float, stop=None) -> None:
        """Process queued work through t_stop; `stop()` aborts between items."""
        while self._queue and self._queue[0][0] <= t_stop:
            t, _, fn = heapq.heappop(self._queue)
            self.now = max(self.now, t)
            fn()
            if stop is not None and stop():
                return
        self.now = max(self.now, t_stop)

    def step(self, dt: float) -> None:
        self.run_until(self.now + dt)

    def pending_work(self) -> bool:
        return bool(self._queue)

    # --------------------------------------------------------------- injection

    def inject(self, frame: Frame) -> None:
        """Emit a frame as the analyzer host, routed immediately at sim time."""
        self._route(frame, self.analyzer)

    # ----------------------------------------------------------------- queries

    def arp_cache_of(self, name: str) -> dict[Ipv4Addr, MacAddr]:
        host = self.hosts[name]
        return {ip: e.mac for ip, e in host.arp_cache.items() if e.expires_at > self.now}

    def export_pcap(self, path, link: str | None = "lan") -> int:
        """Write logged frames as a capture file.

        The default keeps only the LAN segment, which is what a tap beside
        the analyzer would see; pass link=None for every logged frame.
        """
        from .pcapio import write_pcap
        frames = [rec.frame for rec in self.log if link is None or rec.link == link]
        return write_pcap(path, frames)

    # ----------------------------------------------------------------- routing

    def _route(self, frame: Frame, sender: SimHost | None) -> None:
        if frame.dst_mac.is_broadcast:
            receivers = tuple(h for h in self._lan_by_mac.values() if h is not sender)
            self.log.append(DeliveryRecord(self.now, frame, tuple(h.name for h in receivers), "lan"))
            for host in receivers:
                self._receive(host, frame)
            return
        owner = self._lan_by_mac.get(frame.dst_mac)
        if owner is None:
            # No station owns this MAC: the frame dies on the wire.
            self.log.append(DeliveryRecord(self.now, frame, (), "lan"))
            return
        self.log.append(DeliveryRecord(self.now, frame, (owner.name,), "lan"))
        self._receive(owner, frame)

    def _receive(self, host: SimHost, frame: Frame) -> None:
        if host.role == ROLE_ANALYZER:
            host.inbox.append(frame)
        if frame.ethertype == ETHERTYPE_ARP:
            pkt = parse_arp(frame)
            if pkt is None:
                return
            self._upsert(host, pkt.sender_ip, pkt.sender_mac)
            if pkt.op == ARP_OP_REQUEST and pkt.target_ip == host.ip:
                reply = ArpPacket(ARP_OP_REPLY, host.mac, host.ip, pkt.sender_mac, pkt.sender_ip)
                self._route(arp_frame(reply, eth_src=host.mac, eth_dst=pkt.sender_mac, ts=self.now), host)
            return
        if frame.ethertype != ETHERTYPE_IPV4 or host.role == ROLE_ANALYZER:
            return
        header = parse_ipv4(frame.payload)
        if header is None:
            return
        if host.role == ROLE_GATEWAY:
            self._gateway_ip(host, frame, header)
        elif host.role == ROLE_EXTERNAL:
            self._external_ip(host, header)
        # device hosts sink inbound payloads; delivery is already logged

    def _upsert(self, host: SimHost, ip: Ipv4Addr, mac: MacAddr) -> None:
        host.arp_cache[ip] = _CacheEntry(mac, self.now + self.scenario.arp_ttl)
        queued = host.pending.pop(ip, None)
        if queued:
            for packet in queued:
                self._route(Frame(mac, host.mac, ETHERTYPE_IPV4, packet, ts=self.now), host)

    # ---------------------------------------------------------- gateway duties

    def _gateway_ip(self, gw: SimHost, frame: Frame, header) -> None:
        if header.dst_ip == gw.ip:
            self._resolve_dns(gw, header)
            return
        ext = self._ext_by_ip.get(header.dst_ip)
        if ext is not None:
            wan = Frame(ext.mac, gw.mac, ETHERTYPE_IPV4, frame.payload, ts=self.now)
            self.log.append(DeliveryRecord(self.now, wan, (ext.name,), "wan"))
            self._receive(ext, wan)
        elif header.dst_ip in self._lan_by_ip:
            self._send_ip(gw, header.dst_ip, frame.payload)
        # unknown destination: sink; arrival at the gateway is already logged

    def _resolve_dns(self, gw: SimHost, header) -> None:
        if header.protocol != PROTO_UDP:
            return
        dg = parse_udp(header.payload)
        if dg is None or dg.dst_port != 53:
            return
        query = parse_dns_query(dg.payload)
        if query is None:
            return
        txid, qname = query
        ext = self._ext_by_name.get(qname.lower())
        answers = [(qname, ext.ip)] if ext is not None else []
        payload = build_udp(53, dg.src_port, build_dns_response(txid, qname, answers))
        self._send_ip(gw, header.src_ip, build_ipv4(gw.ip, header.src_ip, PROTO_UDP, payload))

    # --------------------------------------------------------- external duties

    def _external_ip(self, ext: SimHost, header) -> None:
        if header.protocol == PROTO_UDP:
            dg = parse_udp(header.payload)
            if dg is None:
                return
            ext.received.append((self.now, header.src_ip, PROTO_UDP, len(dg.payload)))
            echo = build_udp(dg.dst_port, dg.src_port, b"R" * len(dg.payload))
            self._wan_reply(ext, header.src_ip, PROTO_UDP, echo)
        elif header.protocol == PROTO_TCP:
            seg = parse_tcp(header.payload)
            if seg is None:
                return
            ext.received.append((self.now, header.src_ip, PROTO_TCP, len(seg.payload)))
            if seg.payload:
                echo = build_tcp(seg.dst_port, seg.src_port, b"R" * len(seg.payload))
                self._wan_reply(ext, header.src_ip, PROTO_TCP, echo)

    def _wan_reply(self, ext: SimHost, dst_ip: Ipv4Addr, proto: int, l4: bytes) -> None:
        gw = self.gateway
        frame = Frame(gw.mac, ext.mac, ETHERTYPE_IPV4, build_ipv4(ext.ip, dst_ip, proto, l4), ts=self.now)
        self.log.append(DeliveryRecord(self.now, frame, (gw.name,), "wan"))
        self._receive(gw, frame)

    # ------------------------------------------------------------ LAN emission

    def _send_ip(self, host: SimHost, dst_ip: Ipv4Addr, packet: bytes) -> None:
        """Emit an IP packet on the LAN, resolving the next hop via ARP."""
        next_hop = dst_ip if dst_ip in self._lan_by_ip else self.gateway.ip
        entry = host.arp_cache.get(next_hop)
        if entry is not None and entry.expires_at > self.now:
            self._route(Frame(entry.mac, host.mac, ETHERTYPE_IPV4, packet, ts=self.now), host)
            return
        host.pending.setdefault(next_hop, []).append(packet)
        req = ArpPacket(ARP_OP_REQUEST, host.mac, host.ip, MacAddr(b"\x00" * 6), next_hop)
        self._route(arp_frame(req, eth_src=host.mac, eth_dst=BROADCAST_MAC, ts=self.now), host)

    # ----------------------------------------------------------- script events

    def _fire(self, ev: ScriptedEvent) -> None:
        host = self.hosts[ev.host]
        if ev.kind == "dns":
            port = host.take_port()
            query = build_dns_query(next(self._txid), ev.hostname)
            packet = build_ipv4(host.ip, self.gateway.ip, PROTO_UDP, build_udp(port, 53, query))
            self._send_ip(host, self.gateway.ip, packet)
        elif ev.kind == "udp":
            port = host.take_port()
            packet = build_ipv4(host.ip, ev.dst_ip, PROTO_UDP,
                                build_udp(port, UDP_DATA_PORT, b"U" * ev.size))
            self._send_ip(host, ev.dst_ip, packet)
        elif ev.kind == "tcp":
            port = host.take_port()
            packet = build_ipv4(host.ip, ev.dst_ip, PROTO_TCP,
                                build_tcp(port, TCP_DATA_PORT, b"T" * ev.size))
            self._send_ip(host, ev.dst_ip, packet)
        elif ev.kind == "tls":
            port = host.take_port()
            hello = build_client_hello(ev.sni)
            self._send_ip(host, ev.dst_ip,
                          build_ipv4(host.ip, ev.dst_ip, PROTO_TCP, build_tcp(port, TLS_PORT, hello)))
            if ev.size:
                self._send_ip(host, ev.dst_ip,
                              build_ipv4(host.ip, ev.dst_ip, PROTO_TCP,
                                         build_tcp(port, TLS_PORT, b"T" * ev.size, seq=len(hello))))
