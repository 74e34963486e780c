"""Capture backends: simulated LAN, pcap replay, and live raw sockets, one interface.

A backend owns the clock. recv() hands over the next captured frame or None;
idle(until) lets time progress (virtual or wall) and returns False once the
stream can produce nothing more.
"""

from __future__ import annotations

import logging
import selectors
import time
from dataclasses import dataclass
from pathlib import Path

from .netmodel import Ipv4Addr, MacAddr
from .pcapio import PcapError, ReplayStats, replay_pcap
from .simnet import SimLan, load_scenario
from .wire import Frame, serialize_frame

log = logging.getLogger(__name__)

KIND_SIM = "sim"
KIND_PCAP = "pcap"
KIND_LIVE = "live"


class BackendError(RuntimeError):
    pass


@dataclass
class BackendConfig:
    kind: str
    scenario: str | None = None
    pcap: str | None = None
    interface: str | None = None


class SimBackend:
    """Drives a SimLan: the analyzer host's inbox is the capture feed."""

    def __init__(self, lan: SimLan):
        if lan.analyzer is None:
            raise BackendError("scenario has no analyzer host")
        self.lan = lan
        self.analyzer_mac: MacAddr = lan.analyzer.mac
        self.analyzer_ip: Ipv4Addr = lan.analyzer.ip
        self.sent = 0
        self._cursor = 0

    def now(self) -> float:
        return self.lan.now

    def send(self, frame: Frame) -> None:
        self.sent += 1
        self.lan.inject(frame)

    def recv(self) -> Frame | None:
        inbox = self.lan.analyzer.inbox
        if self._cursor < len(inbox):
            frame = inbox[self._cursor]
            self._cursor += 1
            return frame
        return None

    def idle(self, until: float | None) -> bool:
        if until is None:
            raise BackendError("simulated time needs a bounded idle deadline")
        inbox = self.lan.analyzer.inbox
        self.lan.run_until(until, stop=lambda: self._cursor < len(inbox))
        return True

    def close(self) -> None:
        pass


class PcapBackend:
    """Replays a capture file; the clock is the record timestamps."""

    def __init__(self, path: str | Path):
        self.stats = ReplayStats()
        self.error: PcapError | None = None
        self.analyzer_mac = None
        self.analyzer_ip = None
        self._now = 0.0
        self._done = False
        self._iter = replay_pcap(path, self.stats)
        self._pending: Frame | None = None
        self._advance()  # fail fast on a bad header
        if self._pending is not None:
            self._now = self._pending.ts

    def _advance(self) -> None:
        try:
            self._pending = next(self._iter)
        except StopIteration:
            self._pending = None
            self._done = True
        except PcapError as exc:
            self.error = exc
            self._pending = None
            self._done = True

    def now(self) -> float:
        return self._now

    def send(self, frame: Frame) -> None:
        # a capture file cannot carry injected traffic; drop silently
        pass

    def recv(self) -> Frame | None:
        frame = self._pending
        if frame is None:
            return None
        self._now = frame.ts
        self._advance()
        return frame

    def idle(self, until: float | None) -> bool:
        if self._pending is None:
            if until is not None:
                self._now = max(self._now, until)
            return False
        return True

    def close(self) -> None:
        self._iter.close()


class LiveBackend:
    """Raw AF_PACKET capture; requires CAP_NET_RAW (or root) on Linux."""

    ETH_P_ALL = 0x0003

    def __init__(self, interface: str):
        import socket

        try:
            self._sock = socket.socket(socket.AF_PACKET, socket.SOCK_RAW,
                                       socket.htons(self.ETH_P_ALL))
        except PermissionError as exc:
            raise PermissionError(
                "raw capture needs CAP_NET_RAW; run as root or grant the capability"
            ) from exc
        self._sock.bind((interface, 0))
        self._sock.setblocking(False)
        self.analyzer_mac = MacAddr(self._ioctl(interface, 0x8927)[18:24])  # SIOCGIFHWADDR
        self.analyzer_ip = Ipv4Addr(self._ioctl(interface, 0x8915)[20:24])  # SIOCGIFADDR
        self._selector = selectors.DefaultSelector()
        self._selector.register(self._sock, selectors.EVENT_READ)

    def _ioctl(self, interface: str, request: int) -> bytes:
        import fcntl
        import struct as _struct

        return fcntl.ioctl(self._sock.fileno(), request,
                           _struct.pack("256s", interface.encode()[:15]))

    def now(self) -> float:
        return time.time()

    def send(self, frame: Frame) -> None:
        self._sock.send(serialize_frame(frame))

    def recv(self) -> Frame | None:
        try:
            data = self._sock.recv(65535)
        except BlockingIOError:
            return None
        from .wire import parse_frame

        return parse_frame(data, ts=self.now())

    def idle(self, until: float | None) -> bool:
        budget = 0.2 if until is None else until - self.now()
        if budget > 0:
            self._selector.select(timeout=min(budget, 0.2))
        return True

    def close(self) -> None:
        self._selector.close()
        self._sock.close()


def open_backend(config: BackendConfig):
    if config.kind == KIND_SIM:
        if not config.scenario:
            raise BackendError("sim backend needs --scenario")
        return SimBackend(SimLan(load_scenario(config.scenario)))
    if config.kind == KIND_PCAP:
        if not config.pcap:
            raise BackendError("pcap backend needs --pcap")
        if not Path(config.pcap).exists():
            raise FileNotFoundError(config.pcap)
        return PcapBackend(config.pcap)
    if config.kind == KIND_LIVE:
        if not config.interface:
            raise BackendError("live backend needs --interface")
        return LiveBackend(config.interface)
    raise BackendError(f"unknown backend kind {config.kind!r}")
