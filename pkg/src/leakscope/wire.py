"""Packet wire formats: Ethernet, ARP, IPv4, UDP, TCP, plus DNS and TLS builders.

Parsers return None for malformed input so callers can count and drop; they
never raise on untrusted bytes. Builders always emit well-formed packets.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence, Union

from .netmodel import Ipv4Addr, MacAddr

ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_ARP = 0x0806

ARP_OP_REQUEST = 1
ARP_OP_REPLY = 2

PROTO_TCP = 6
PROTO_UDP = 17

ETH_HEADER_LEN = 14
ARP_BODY_LEN = 28


@dataclass(frozen=True)
class Frame:
    """One Ethernet frame with its capture timestamp."""

    dst_mac: MacAddr
    src_mac: MacAddr
    ethertype: int
    payload: bytes
    ts: float = 0.0


def serialize_frame(frame: Frame) -> bytes:
    return frame.dst_mac.octets + frame.src_mac.octets + struct.pack("!H", frame.ethertype) + frame.payload


def parse_frame(data: bytes, ts: float = 0.0) -> Frame | None:
    if len(data) < ETH_HEADER_LEN:
        return None
    (ethertype,) = struct.unpack_from("!H", data, 12)
    return Frame(
        dst_mac=MacAddr(data[0:6]),
        src_mac=MacAddr(data[6:12]),
        ethertype=ethertype,
        payload=data[ETH_HEADER_LEN:],
        ts=ts,
    )


@dataclass(frozen=True)
class ArpPacket:
    op: int
    sender_mac: MacAddr
    sender_ip: Ipv4Addr
    target_mac: MacAddr
    target_ip: Ipv4Addr


def serialize_arp(pkt: ArpPacket) -> bytes:
    body = struct.pack(
        "!HHBBH6s4s6s4s",
        1,  # hardware type: Ethernet
        ETHERTYPE_IPV4,
        6,
        4,
        pkt.op,
        pkt.sender_mac.octets,
        pkt.sender_ip.packed,
        pkt.target_mac.octets,
        pkt.target_ip.packed,
    )
    assert len(body) == ARP_BODY_LEN
    return body


def parse_arp(frame: Frame) -> ArpPacket | None:
    """Decode the ARP body of a frame; None unless it is a well-formed IPv4-over-Ethernet ARP."""
    if frame.ethertype != ETHERTYPE_ARP or len(frame.payload) != ARP_BODY_LEN:
        return None
    htype, ptype, hlen, plen, op = struct.unpack_from("!HHBBH", frame.payload, 0)
    if htype != 1 or ptype != ETHERTYPE_IPV4 or hlen != 6 or plen != 4:
        return None
    if op not in (ARP_OP_REQUEST, ARP_OP_REPLY):
        return None
    return ArpPacket(
        op=op,
        sender_mac=MacAddr(frame.payload[8:14]),
        sender_ip=Ipv4Addr(frame.payload[14:18]),
        target_mac=MacAddr(frame.payload[18:24]),
        target_ip=Ipv4Addr(frame.payload[24:28]),
    )


def arp_frame(pkt: ArpPacket, eth_src: MacAddr, eth_dst: MacAddr, ts: float = 0.0) -> Frame:
    return Frame(dst_mac=eth_dst, src_mac=eth_src, ethertype=ETHERTYPE_ARP, payload=serialize_arp(pkt), ts=ts)


@dataclass(frozen=True)
class Ipv4Header:
    src_ip: Ipv4Addr
    dst_ip: Ipv4Addr
    protocol: int
    total_length: int
    header_len: int
    payload: bytes  # bytes after the header as captured; may be short of total_length


def _checksum(data: bytes) -> int:
    if len(data) % 2:
        data += b"\x00"
    total = sum(struct.unpack(f"!{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def build_ipv4(src: Ipv4Addr, dst: Ipv4Addr, protocol: int, payload: bytes,
               ttl: int = 64, ident: int = 0) -> bytes:
    total = 20 + len(payload)
    header = struct.pack("!BBHHHBBH4s4s", 0x45, 0, total, ident, 0, ttl, protocol, 0,
                         src.packed, dst.packed)
    header = header[:10] + struct.pack("!H", _checksum(header)) + header[12:]
    return header + payload


def parse_ipv4(data: bytes) -> Ipv4Header | None:
    if len(data) < 20:
        return None
    version_ihl = data[0]
    if version_ihl >> 4 != 4:
        return None
    header_len = (version_ihl & 0x0F) * 4
    if header_len < 20 or len(data) < header_len:
        return None
    (total_length,) = struct.unpack_from("!H", data, 2)
    if total_length < header_len:
        return None
    return Ipv4Header(
        src_ip=Ipv4Addr(data[12:16]),
        dst_ip=Ipv4Addr(data[16:20]),
        protocol=data[9],
        total_length=total_length,
        header_len=header_len,
        payload=data[header_len:total_length] if total_length <= len(data) else data[header_len:],
    )


@dataclass(frozen=True)
class UdpDatagram:
    src_port: int
    dst_port: int
    payload: bytes


def build_udp(src_port: int, dst_port: int, payload: bytes) -> bytes:
    return struct.pack("!HHHH", src_port, dst_port, 8 + len(payload), 0) + payload


def parse_udp(data: bytes) -> UdpDatagram | None:
    if len(data) < 8:
        return None
    src_port, dst_port, length = struct.unpack_from("!HHH", data, 0)
    if length < 8:
        return None
    return UdpDatagram(src_port, dst_port, data[8:length] if length <= len(data) else data[8:])


@dataclass(frozen=True)
class TcpSegment:
    src_port: int
    dst_port: int
    seq: int
    flags: int
    payload: bytes


def build_tcp(src_port: int, dst_port: int, payload: bytes, seq: int = 0, flags: int = 0x18) -> bytes:
    # 20-byte header, no options; 0x18 = PSH|ACK.
    return struct.pack("!HHIIBBHHH", src_port, dst_port, seq, 0, 5 << 4, flags, 65535, 0, 0) + payload


def parse_tcp(data: bytes) -> TcpSegment | None:
    if len(data) < 20:
        return None
    src_port, dst_port, seq = struct.unpack_from("!HHI", data, 0)
    offset = (data[12] >> 4) * 4
    if offset < 20 or len(data) < offset:
        return None
    return TcpSegment(src_port, dst_port, seq, data[13], data[offset:])


# ---------------------------------------------------------------- DNS builders

DNS_TYPE_A = 1
DNS_TYPE_CNAME = 5
DNS_CLASS_IN = 1


def encode_dns_name(name: str) -> bytes:
    out = bytearray()
    for label in name.rstrip(".").split("."):
        raw = label.encode("ascii")
        if not 0 < len(raw) < 64:
            raise ValueError(f"bad DNS label in {name!r}")
        out.append(len(raw))
        out += raw
    out.append(0)
    return bytes(out)


def build_dns_query(txid: int, qname: str) -> bytes:
    header = struct.pack("!HHHHHH", txid, 0x0100, 1, 0, 0, 0)
    return header + encode_dns_name(qname) + struct.pack("!HH", DNS_TYPE_A, DNS_CLASS_IN)


def build_dns_response(txid: int, qname: str,
                       answers: Sequence[tuple[str, Union[Ipv4Addr, str]]]) -> bytes:
    """Answer records: (owner, Ipv4Addr) emits an A record, (owner, str) a CNAME."""
    header = struct.pack("!HHHHHH", txid, 0x8180, 1, len(answers), 0, 0)
    out = bytearray(header)
    out += encode_dns_name(qname) + struct.pack("!HH", DNS_TYPE_A, DNS_CLASS_IN)
    for owner, value in answers:
        out += encode_dns_name(owner)
        if isinstance(value, Ipv4Addr):
            out += struct.pack("!HHIH", DNS_TYPE_A, DNS_CLASS_IN, 300, 4) + value.packed
        else:
            target = encode_dns_name(value)
            out += struct.pack("!HHIH", DNS_TYPE_CNAME, DNS_CLASS_IN, 300, len(target)) + target
    return bytes(out)


def parse_dns_query(data: bytes) -> tuple[int, str] | None:
    """Decode (txid, first qname) from an uncompressed DNS query."""
    if len(data) < 12:
        return None
    txid, flags, qdcount = struct.unpack_from("!HHH", data, 0)
    if flags & 0x8000 or qdcount < 1:
        return None
    labels = []
    pos = 12
    while True:
        if pos >= len(data):
            return None
        n = data[pos]
        if n == 0:
            break
        if n & 0xC0 or pos + 1 + n > len(data):
            return None
        labels.append(data[pos + 1:pos + 1 + n].decode("ascii", "replace"))
        pos += 1 + n
    if not labels:
        return None
    return txid, ".".join(labels)


# ------------------------------------------------------------- TLS ClientHello

TLS_HANDSHAKE = 0x16
TLS_CLIENT_HELLO = 0x01
TLS_EXT_SERVER_NAME = 0x0000


def build_client_hello(server_name: str | None, rand: bytes = b"\x00" * 32) -> bytes:
    """A minimal TLS 1.2-style ClientHello record, optionally carrying SNI."""
    if len(rand) != 32:
        raise ValueError("ClientHello random must be 32 bytes")
    body = bytearray()
    body += b"\x03\x03" + rand
    body.append(0)  # empty session id
    body += struct.pack("!H", 4) + b"\x13\x01\x13\x02"  # two cipher suites
    body += b"\x01\x00"  # null compression only
    if server_name is not None:
        host = server_name.encode("ascii")
        entry = struct.pack("!BH", 0, len(host)) + host  # name_type 0 = host_name
        sni = struct.pack("!H", len(entry)) + entry
        ext = struct.pack("!HH", TLS_EXT_SERVER_NAME, len(sni)) + sni
        body += struct.pack("!H", len(ext)) + ext
    handshake = struct.pack("!B", TLS_CLIENT_HELLO) + len(body).to_bytes(3, "big") + bytes(body)
    return struct.pack("!BHH", TLS_HANDSHAKE, 0x0301, len(handshake)) + handshake
