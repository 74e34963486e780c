"""Device discovery and labeling: ARP sweep plus OUI-keyed vendor/name tables."""

from __future__ import annotations

import ipaddress
import logging
import threading
from dataclasses import dataclass, replace
from pathlib import Path

from .netmodel import (
    BROADCAST_MAC,
    DeviceId,
    DeviceRecord,
    Ipv4Addr,
    MacAddr,
    Oui,
    device_id_of,
    oui_of,
)
from .wire import ARP_OP_REPLY, ARP_OP_REQUEST, ArpPacket, arp_frame, parse_arp

log = logging.getLogger(__name__)

UNKNOWN_VENDOR = "unknown"
UNKNOWN_NAME = "unknown device"


@dataclass(frozen=True)
class OuiTable:
    entries: dict

    def vendor(self, oui: Oui) -> str:
        return self.entries.get(oui, UNKNOWN_VENDOR)


@dataclass(frozen=True)
class NameMap:
    entries: dict

    def name(self, oui: Oui) -> str | None:
        return self.entries.get(oui)


def _load_oui_keyed(path: str | Path, what: str) -> dict:
    entries: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise ValueError(f"{path}: line {lineno}: expected 'XX:XX:XX <text>'")
        try:
            oui = Oui.parse(parts[0])
        except ValueError as exc:
            raise ValueError(f"{path}: line {lineno}: {exc}") from exc
        if oui in entries:
            log.warning("%s: line %d: duplicate %s entry for %s, keeping the later one",
                        path, lineno, what, oui)
        entries[oui] = parts[1].strip()
    return entries


def load_oui_table(path: str | Path) -> OuiTable:
    return OuiTable(_load_oui_keyed(path, "vendor"))


def load_name_map(path: str | Path) -> NameMap:
    return NameMap(_load_oui_keyed(path, "name"))


def identify(mac: MacAddr, oui_table: OuiTable, name_map: NameMap) -> tuple[str, str]:
    """Label a MAC: (vendor, friendly name), with documented fallbacks."""
    oui = oui_of(mac)
    vendor = oui_table.vendor(oui)
    name = name_map.name(oui)
    if name is None:
        name = vendor if vendor != UNKNOWN_VENDOR else UNKNOWN_NAME
    return vendor, name


class DeviceRegistry:
    """Shared read-mostly store of discovered endpoints.

    One writer (scan/ingest path), many readers; every read hands out copies.
    MAC is the primary key; a reused IP evicts the stale record holding it.
    """

    def __init__(self, oui_table: OuiTable | None = None, name_map: NameMap | None = None,
                 analyzer_mac: MacAddr | None = None, analyzer_ip: Ipv4Addr | None = None,
                 gateway_ip: Ipv4Addr | None = None):
        self._oui_table = oui_table or OuiTable({})
        self._name_map = name_map or NameMap({})
        self.analyzer_mac = analyzer_mac
        self.analyzer_ip = analyzer_ip
        self.gateway_ip = gateway_ip
        self._records: dict[DeviceId, DeviceRecord] = {}
        self._gateway: DeviceRecord | None = None
        self._lock = threading.RLock()

    def upsert(self, mac: MacAddr, ip: Ipv4Addr, now: float) -> DeviceRecord | None:
        """Record a (mac, ip) sighting; returns the record, or None for the analyzer itself."""
        if self.analyzer_mac is not None and mac == self.analyzer_mac:
            return None
        with self._lock:
            is_gateway = self.gateway_ip is not None and ip == self.gateway_ip
            if is_gateway:
                if self._gateway is None or self._gateway.mac != mac:
                    vendor, name = identify(mac, self._oui_table, self._name_map)
                    self._gateway = DeviceRecord(device_id_of(mac), mac, ip, vendor,
                                                 "gateway" if name == UNKNOWN_NAME else name,
                                                 now, now, monitored=False)
                else:
                    self._gateway = replace(self._gateway, last_seen=now)
                self._records.pop(device_id_of(mac), None)
                return self._gateway
            if self._gateway is not None and mac == self._gateway.mac:
                # the gateway relays WAN traffic under its own MAC; foreign
                # source IPs on that MAC must not spawn a device record
                self._gateway = replace(self._gateway, last_seen=now)
                return self._gateway
            device_id = device_id_of(mac)
            # an IP moving to a new MAC leaves at most one holder
            stale = [d for d, r in self._records.items() if r.ip == ip and d != device_id]
            for d in stale:
                del self._records[d]
            current = self._records.get(device_id)
            if current is None:
                vendor, name = identify(mac, self._oui_table, self._name_map)
                record = DeviceRecord(device_id, mac, ip, vendor, name, now, now, monitored=True)
            else:
                record = replace(current, ip=ip, last_seen=now)
            self._records[device_id] = record
            return record

    def devices(self) -> list[DeviceRecord]:
        with self._lock:
            return sorted(self._records.values(), key=lambda r: r.device_id)

    def gateway(self) -> DeviceRecord | None:
        with self._lock:
            return self._gateway

    def get(self, device_id: DeviceId) -> DeviceRecord | None:
        with self._lock:
            return self._records.get(device_id)

    def has_device(self, device_id: DeviceId) -> bool:
        return self.get(device_id) is not None

    def by_mac(self, mac: MacAddr) -> DeviceRecord | None:
        with self._lock:
            return self._records.get(device_id_of(mac))

    def by_ip(self, ip: Ipv4Addr) -> DeviceRecord | None:
        with self._lock:
            for record in self._records.values():
                if record.ip == ip:
                    return record
            return None

    def is_lan_infrastructure(self, ip: Ipv4Addr) -> bool:
        """True for the gateway's and analyzer's own addresses."""
        if self.analyzer_ip is not None and ip == self.analyzer_ip:
            return True
        return self.gateway_ip is not None and ip == self.gateway_ip


def arp_scan(backend, subnet: str, registry: DeviceRegistry, timeout: float = 2.0) -> list[DeviceRecord]:
    """Sweep the subnet with ARP requests; every distinct replying MAC becomes a record."""
    net = ipaddress.ip_network(subnet, strict=False)
    if net.prefixlen < 16:
        raise ValueError(f"scan range too large: /{net.prefixlen} (minimum /16)")
    src_mac, src_ip = backend.analyzer_mac, backend.analyzer_ip
    for target in net.hosts():
        if target == src_ip:
            continue
        request = ArpPacket(ARP_OP_REQUEST, src_mac, src_ip, MacAddr(b"\x00" * 6), target)
        backend.send(arp_frame(request, eth_src=src_mac, eth_dst=BROADCAST_MAC, ts=backend.now()))
    deadline = backend.now() + timeout
    while True:
        frame = backend.recv()
        if frame is None:
            if backend.now() >= deadline or not backend.idle(deadline):
                break
            continue
        pkt = parse_arp(frame)
        if pkt is None or pkt.op != ARP_OP_REPLY or pkt.target_mac != src_mac:
            continue
        registry.upsert(pkt.sender_mac, pkt.sender_ip, backend.now())
    return registry.devices()
