"""Value types shared by every layer: addresses, device identity, traffic snapshots.

Everything here is an immutable value; mutation happens in the stores that
hold these, never on the values themselves.
"""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass, field

# IPv4 addresses are stdlib values; alias so call sites read uniformly.
Ipv4Addr = ipaddress.IPv4Address

DeviceId = str

_MAC_RE = re.compile(r"^([0-9a-fA-F]{2})[:-]([0-9a-fA-F]{2})[:-]([0-9a-fA-F]{2})"
                     r"[:-]([0-9a-fA-F]{2})[:-]([0-9a-fA-F]{2})[:-]([0-9a-fA-F]{2})$")

BROADCAST_OCTETS = b"\xff\xff\xff\xff\xff\xff"


@dataclass(frozen=True, order=True)
class MacAddr:
    """48-bit hardware address."""

    octets: bytes

    def __post_init__(self) -> None:
        if len(self.octets) != 6:
            raise ValueError(f"MAC needs 6 octets, got {len(self.octets)}")

    @classmethod
    def parse(cls, text: str) -> "MacAddr":
        """Parse colon- or dash-separated hex; case-insensitive."""
        m = _MAC_RE.match(text.strip())
        if m is None:
            raise ValueError(f"bad MAC address: {text!r}")
        return cls(bytes(int(g, 16) for g in m.groups()))

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)

    @property
    def is_broadcast(self) -> bool:
        return self.octets == BROADCAST_OCTETS

    @property
    def is_multicast(self) -> bool:
        # Low bit of the first octet; broadcast is the all-ones special case.
        return bool(self.octets[0] & 0x01)

    @property
    def is_locally_administered(self) -> bool:
        return bool(self.octets[0] & 0x02)


BROADCAST_MAC = MacAddr(BROADCAST_OCTETS)


@dataclass(frozen=True, order=True)
class Oui:
    """Vendor prefix: the first three octets of a MAC."""

    prefix: bytes

    def __post_init__(self) -> None:
        if len(self.prefix) != 3:
            raise ValueError("OUI is exactly 3 octets")

    @classmethod
    def parse(cls, text: str) -> "Oui":
        parts = text.strip().split(":")
        if len(parts) != 3 or not all(len(p) == 2 for p in parts):
            raise ValueError(f"bad OUI: {text!r}")
        return cls(bytes(int(p, 16) for p in parts))

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.prefix)


def oui_of(mac: MacAddr) -> Oui:
    return Oui(mac.octets[:3])


def device_id_of(mac: MacAddr) -> DeviceId:
    """Stable identifier: lowercase hex MAC with separators stripped."""
    return mac.octets.hex()


@dataclass(frozen=True)
class DeviceRecord:
    """One discovered LAN endpoint."""

    device_id: DeviceId
    mac: MacAddr
    ip: Ipv4Addr
    vendor: str
    name: str
    first_seen: float
    last_seen: float
    monitored: bool = True


@dataclass(frozen=True)
class TrafficSample:
    """Byte counts for one whole second."""

    t: int
    bytes_out: int
    bytes_in: int


@dataclass(frozen=True)
class DeviceTraffic:
    """Per-device slice of a snapshot."""

    device_id: DeviceId
    name: str
    vendor: str
    mac: str
    ip: str
    blocked: bool
    tracker_count: int
    tracker_hosts: tuple[str, ...]
    series: tuple[TrafficSample, ...]

    def to_wire(self) -> dict:
        return {
            "device_id": self.device_id,
            "name": self.name,
            "vendor": self.vendor,
            "mac": self.mac,
            "ip": self.ip,
            "blocked": self.blocked,
            "tracker_count": self.tracker_count,
            "tracker_hosts": list(self.tracker_hosts),
            "series": [[s.t, s.bytes_out, s.bytes_in] for s in self.series],
        }

    @classmethod
    def from_wire(cls, obj: dict) -> "DeviceTraffic":
        return cls(
            device_id=obj["device_id"],
            name=obj["name"],
            vendor=obj["vendor"],
            mac=obj["mac"],
            ip=obj["ip"],
            blocked=obj["blocked"],
            tracker_count=obj["tracker_count"],
            tracker_hosts=tuple(obj["tracker_hosts"]),
            series=tuple(TrafficSample(t, o, i) for t, o, i in obj["series"]),
        )


@dataclass(frozen=True)
class TrafficSnapshot:
    """Point-in-time view served by the API and rendered by clients."""

    generated_at: int
    devices: tuple[DeviceTraffic, ...] = field(default_factory=tuple)

    def to_wire(self) -> dict:
        return {
            "generated_at": self.generated_at,
            "devices": [d.to_wire() for d in self.devices],
        }

    @classmethod
    def from_wire(cls, obj: dict) -> "TrafficSnapshot":
        return cls(
            generated_at=obj["generated_at"],
            devices=tuple(DeviceTraffic.from_wire(d) for d in obj["devices"]),
        )
