"""ARP spoof/forward/jam engine.

Every cycle, one spoofed reply per ordered pair of distinct nodes in
devices + gateway tells the pair's first element that the second lives at the
analyzer's MAC, putting the analyzer on-path in both directions. Pairs
touching a blocked device get a fresh corrupt MAC instead, so the victim's
frames die on the wire. Shutdown heals every cache with true MACs.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass

from .discovery import DeviceRegistry
from .netmodel import DeviceId, DeviceRecord, Ipv4Addr, MacAddr
from .policy import PolicyStore
from .wire import ARP_OP_REPLY, ArpPacket, Frame, arp_frame, parse_ipv4

log = logging.getLogger(__name__)

DEFAULT_CYCLE_INTERVAL = 2.0
ARP_PACKET_BYTES = 28


@dataclass(frozen=True)
class SpoofPlan:
    cycle_interval: float
    packets: tuple[ArpPacket, ...]


def corrupt_mac(rng: random.Random, forbidden: frozenset[MacAddr] | set[MacAddr]) -> MacAddr:
    """A random unicast, locally administered MAC owned by nobody on the LAN."""
    while True:
        octets = bytearray(rng.randbytes(6))
        octets[0] = (octets[0] | 0x02) & 0xFE
        mac = MacAddr(bytes(octets))
        if mac not in forbidden:
            return mac


def plan_cycle(devices: list[DeviceRecord], gateway: DeviceRecord, analyzer_mac: MacAddr,
               blocked: set[DeviceId], rng: random.Random,
               cycle_interval: float = DEFAULT_CYCLE_INTERVAL) -> SpoofPlan:
    """One spoofed reply per ordered pair (recipient, impersonated) of devices + gateway."""
    nodes = list(devices) + [gateway]
    forbidden = {n.mac for n in nodes} | {analyzer_mac}
    packets = []
    for recipient in nodes:
        for impersonated in nodes:
            if impersonated is recipient:
                continue
            jam = recipient.device_id in blocked or impersonated.device_id in blocked
            sender = corrupt_mac(rng, forbidden) if jam else analyzer_mac
            packets.append(ArpPacket(
                op=ARP_OP_REPLY,
                sender_mac=sender,
                sender_ip=impersonated.ip,
                target_mac=recipient.mac,
                target_ip=recipient.ip,
            ))
    return SpoofPlan(cycle_interval, tuple(packets))


def overhead_bits_per_sec(n: int, cycle_interval: float = DEFAULT_CYCLE_INTERVAL) -> float:
    """Spoofing cost of n devices: 28-byte ARPs, n(n+1) per cycle."""
    return ARP_PACKET_BYTES * n * (n + 1) / cycle_interval * 8


class ForwardTable:
    """True next-hop MAC per destination IP, read live from the registry."""

    def __init__(self, registry: DeviceRegistry):
        self._registry = registry

    def lookup(self, src_ip: Ipv4Addr, dst_ip: Ipv4Addr) -> MacAddr | None:
        device = self._registry.by_ip(dst_ip)
        if device is not None:
            return device.mac
        gateway = self._registry.gateway()
        return gateway.mac if gateway is not None else None


FORWARDED = "forwarded"
NOT_OURS = "not-ours"
BLOCKED = "blocked"
UNKNOWN = "unknown"


def forward(frame: Frame, table: ForwardTable, backend, analyzer_mac: MacAddr,
            analyzer_ip: Ipv4Addr, blocked: set[DeviceId], registry: DeviceRegistry,
            counters: dict) -> str:
    """Re-emit an intercepted frame to its true destination, MACs rewritten only."""
    if frame.dst_mac != analyzer_mac:
        return NOT_OURS
    header = parse_ipv4(frame.payload)
    if header is None or header.dst_ip == analyzer_ip:
        return NOT_OURS
    src_device = registry.by_mac(frame.src_mac) or registry.by_ip(header.src_ip)
    dst_device = registry.by_ip(header.dst_ip)
    if (src_device is not None and src_device.device_id in blocked) or (
            dst_device is not None and dst_device.device_id in blocked):
        counters["blocked_drops"] = counters.get("blocked_drops", 0) + 1
        return BLOCKED
    true_mac = table.lookup(header.src_ip, header.dst_ip)
    if true_mac is None or true_mac == analyzer_mac:
        counters["unknown_drops"] = counters.get("unknown_drops", 0) + 1
        return UNKNOWN
    backend.send(Frame(dst_mac=true_mac, src_mac=analyzer_mac, ethertype=frame.ethertype,
                       payload=frame.payload, ts=backend.now()))
    return FORWARDED


class SpoofEngine:
    """Owns the periodic spoof cycle and shutdown healing."""

    def __init__(self, backend, registry: DeviceRegistry, policy: PolicyStore,
                 interval: float = DEFAULT_CYCLE_INTERVAL, rng: random.Random | None = None):
        self.backend = backend
        self.registry = registry
        self.policy = policy
        self.interval = interval
        self.rng = rng or random.Random()
        self.cycles = 0
        self._next_cycle_at: float | None = None

    def next_cycle_at(self) -> float:
        if self._next_cycle_at is None:
            self._next_cycle_at = self.backend.now()
        return self._next_cycle_at

    def maybe_cycle(self) -> bool:
        """Emit one cycle if its boundary has arrived; returns whether it fired."""
        now = self.backend.now()
        if now < self.next_cycle_at():
            return False
        self.emit_cycle()
        self._next_cycle_at = self.next_cycle_at() + self.interval
        return True

    def emit_cycle(self) -> None:
        gateway = self.registry.gateway()
        if gateway is None:
            return
        devices = self.registry.devices()
        blocked = self.policy.blocked_set(self.backend.now())
        plan = plan_cycle(devices, gateway, self.backend.analyzer_mac, blocked, self.rng,
                          self.interval)
        self._emit(plan.packets)
        self.cycles += 1

    def heal(self) -> None:
        """Tell every node the truth again: sender MAC = impersonated node's real MAC."""
        gateway = self.registry.gateway()
        if gateway is None:
            return
        nodes = self.registry.devices() + [gateway]
        packets = [
            ArpPacket(ARP_OP_REPLY, impersonated.mac, impersonated.ip,
                      recipient.mac, recipient.ip)
            for recipient in nodes for impersonated in nodes if impersonated is not recipient
        ]
        self._emit(packets)

    def _emit(self, packets) -> None:
        for pkt in packets:
            try:
                self.backend.send(arp_frame(pkt, eth_src=self.backend.analyzer_mac,
                                            eth_dst=pkt.target_mac, ts=self.backend.now()))
            except OSError as exc:  # retried implicitly on the next cycle
                log.warning("spoof send failed: %s", exc)

    def run(self, until: float) -> None:
        """Spoof-only loop (no forwarding): cycle at every boundary in [start, until)."""
        while self.backend.now() < until:
            self.maybe_cycle()
            if not self.backend.idle(min(self.next_cycle_at(), until)):
                break
