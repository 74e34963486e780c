"""The capture loop: one thread owns the backend and drives everything else.

Each iteration fires any due spoof cycle, then drains one frame: the frame
registers its sender on the fly, gets re-forwarded if we intercepted it, and
is accounted. When no frame is pending the loop sleeps (or advances virtual
time) until the next cycle boundary. The HTTP API runs on its own threads and
only ever reads snapshots or mutates the policy store, so the loop never
contends with it.
"""

from __future__ import annotations

import ipaddress
import logging
import random
from typing import Optional

from .analyzer import Blocklist, CounterStore, ingest
from .discovery import DeviceRegistry, arp_scan
from .policy import PolicyStore
from .spoofer import DEFAULT_CYCLE_INTERVAL, ForwardTable, SpoofEngine, forward
from .wire import ETHERTYPE_IPV4, Frame, parse_arp, parse_ipv4

log = logging.getLogger(__name__)

# RFC1918 plus link-local. IPv4Address.is_private is too loose here: it also
# matches TEST-NET blocks, and the gateway forwards WAN frames with its own
# MAC but the remote's source IP, which must not register as a LAN sighting.
_LAN_ADDRESS_SPACE = (
    ipaddress.ip_network("10.0.0.0/8"),
    ipaddress.ip_network("172.16.0.0/12"),
    ipaddress.ip_network("192.168.0.0/16"),
    ipaddress.ip_network("169.254.0.0/16"),
)


def _looks_lan_local(ip: ipaddress.IPv4Address) -> bool:
    return any(ip in net for net in _LAN_ADDRESS_SPACE)


class Service:
    def __init__(self, backend, registry: DeviceRegistry, policy: PolicyStore,
                 store: CounterStore, blocklist: Blocklist | None = None,
                 spoof_interval: float = DEFAULT_CYCLE_INTERVAL,
                 rng: random.Random | None = None,
                 intercept: bool | None = None):
        self.backend = backend
        self.registry = registry
        self.policy = policy
        self.store = store
        self.blocklist = blocklist or Blocklist(frozenset())
        self.counters: dict[str, int] = {}
        # a backend with no own MAC (pcap) cannot spoof or forward
        if intercept is None:
            intercept = getattr(backend, "analyzer_mac", None) is not None
        self.intercept = intercept
        self.engine: Optional[SpoofEngine] = None
        self.table: Optional[ForwardTable] = None
        if intercept:
            self.engine = SpoofEngine(backend, registry, policy,
                                      interval=spoof_interval, rng=rng)
            self.table = ForwardTable(registry)

    def scan(self, subnet: str, timeout: float = 2.0):
        return arp_scan(self.backend, subnet, self.registry, timeout=timeout)

    def run(self, until: float | None = None) -> None:
        """Pump frames until the virtual/wall deadline, or to stream end if None."""
        backend = self.backend
        while until is None or backend.now() < until:
            if self.engine is not None:
                self.engine.maybe_cycle()
            frame = backend.recv()
            if frame is not None:
                self.handle(frame)
                continue
            target = until
            if self.engine is not None:
                boundary = self.engine.next_cycle_at()
                target = boundary if target is None else min(target, boundary)
            if not backend.idle(target):
                break  # stream exhausted (pcap) or backend closed

    def handle(self, frame: Frame) -> None:
        now = self.backend.now()
        self._register(frame, now)
        if self.intercept:
            blocked = self.policy.blocked_set(now)
            forward(frame, self.table, self.backend, self.backend.analyzer_mac,
                    self.backend.analyzer_ip, blocked, self.registry, self.counters)
        ingest(frame, self.registry, self.blocklist, self.store, self.backend.now)

    def _register(self, frame: Frame, now: float) -> None:
        """On-the-fly discovery: ARP senders, plus LAN-side IPv4 sources."""
        arp = parse_arp(frame)
        if arp is not None:
            self.registry.upsert(arp.sender_mac, arp.sender_ip, now)
            return
        if frame.ethertype != ETHERTYPE_IPV4:
            return
        if frame.src_mac.is_multicast or frame.src_mac.is_broadcast:
            return
        header = parse_ipv4(frame.payload)
        if header is not None and _looks_lan_local(header.src_ip):
            self.registry.upsert(frame.src_mac, header.src_ip, now)

    def stop(self) -> None:
        """Best-effort cache healing so the LAN keeps working after shutdown."""
        if self.engine is not None:
            try:
                self.engine.heal()
            except OSError:
                log.warning("could not emit healing packets", exc_info=True)
