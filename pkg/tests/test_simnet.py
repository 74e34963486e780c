"""Virtual LAN semantics: ARP resolution, cache poisoning, delivery accounting."""

import pytest

from leakscope.netmodel import Ipv4Addr, MacAddr
from leakscope.simnet import ScenarioError, SimLan, load_scenario, parse_scenario
from leakscope.wire import (
    ARP_OP_REPLY,
    ARP_OP_REQUEST,
    ETHERTYPE_ARP,
    ETHERTYPE_IPV4,
    ArpPacket,
    arp_frame,
    parse_arp,
    parse_ipv4,
    parse_udp,
)

BASIC = """\
# two devices behind a home router, one external service
ttl 60
host gw aa:00:00:00:00:01 192.168.1.1 gateway
host cam aa:00:00:00:00:02 192.168.1.2 device
host tv  aa:00:00:00:00:03 192.168.1.3 device
host srv bb:00:00:00:00:01 93.184.216.34 external

at 1.0 cam udp 93.184.216.34 100
duration 10
"""


def test_parse_scenario_fields():
    sc = parse_scenario(BASIC)
    assert [h.name for h in sc.hosts] == ["gw", "cam", "tv", "srv"]
    assert sc.arp_ttl == 60 and sc.duration == 10
    assert sc.events[0].dst_ip == Ipv4Addr("93.184.216.34") and sc.events[0].size == 100


def test_load_scenario_from_file(tmp_path):
    p = tmp_path / "s.scn"
    p.write_text(BASIC)
    assert parse_scenario(BASIC) == load_scenario(p)


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("host a aa:00:00:00:00:01 10.0.0.1 device", "gateway"),
        ("host a aa:00:00:00:00:01 10.0.0.1 gateway\nhost b aa:00:00:00:00:01 10.0.0.2 device", "duplicate mac"),
        ("host a aa:00:00:00:00:01 10.0.0.1 gateway\nhost b aa:00:00:00:00:02 10.0.0.1 device", "duplicate ip"),
        ("host a aa:00:00:00:00:01 10.0.0.1 gateway\nat 1 a udp 1.2.3.4 5", "device hosts"),
        ("host a aa:00:00:00:00:01 10.0.0.1 gateway\nat 1 b udp 1.2.3.4 5", "unknown host"),
        ("blorp 1", "unknown directive"),
        ("host a aa:00:00:00:00:01 10.0.0.1 gateway\nhost d aa:00:00:00:00:02 10.0.0.2 device\nat 99 d dns x\nduration 5", "past declared duration"),
        ("host a zz:00:00:00:00:01 10.0.0.1 gateway", "bad MAC"),
    ],
)
def test_scenario_rejects(text, fragment):
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text)
    assert fragment in str(err.value)


def test_scenario_error_carries_line_number():
    with pytest.raises(ScenarioError) as err:
        parse_scenario("ttl 60\nhost a aa:00:00:00:00:01 10.0.0.1 robot")
    assert err.value.line == 2


def test_arp_request_precedes_first_ip_frame():
    lan = SimLan(parse_scenario(BASIC))
    lan.run_until(1.0)
    kinds = [(r.frame.ethertype, r.frame.dst_mac.is_broadcast) for r in lan.log]
    assert kinds[0] == (ETHERTYPE_ARP, True)  # who-has gateway, broadcast
    assert kinds[1] == (ETHERTYPE_ARP, False)  # gateway reply, unicast
    first_arp = parse_arp(lan.log[0].frame)
    assert first_arp.op == ARP_OP_REQUEST and first_arp.target_ip == Ipv4Addr("192.168.1.1")


def test_udp_bytes_reach_external_and_echo_back():
    lan = SimLan(parse_scenario(BASIC))
    lan.run_until(10.0)
    srv = lan.hosts["srv"]
    assert srv.received == [(1.0, Ipv4Addr("192.168.1.2"), 17, 100)]
    # echo comes back to the device on the LAN
    cam_deliveries = [r for r in lan.log if r.delivered_to == ("cam",) and r.frame.ethertype == ETHERTYPE_IPV4]
    assert len(cam_deliveries) == 1
    echo = parse_ipv4(cam_deliveries[0].frame.payload)
    assert echo.src_ip == Ipv4Addr("93.184.216.34") and len(parse_udp(echo.payload).payload) == 100


def test_cache_learned_from_broadcast_request():
    lan = SimLan(parse_scenario(BASIC))
    lan.run_until(1.0)
    # the camera's who-has broadcast taught everyone its mapping
    assert lan.arp_cache_of("tv")[Ipv4Addr("192.168.1.2")] == MacAddr.parse("aa:00:00:00:00:02")
    assert lan.arp_cache_of("gw")[Ipv4Addr("192.168.1.2")] == MacAddr.parse("aa:00:00:00:00:02")


def test_ttl_expiry_forgets_entries():
    sc = parse_scenario(BASIC.replace("ttl 60", "ttl 5"))
    lan = SimLan(sc)
    lan.run_until(1.0)
    assert Ipv4Addr("192.168.1.1") in lan.arp_cache_of("cam")
    lan.run_until(6.1)  # refreshed at ~1.0, expires at ~6.0
    assert Ipv4Addr("192.168.1.1") not in lan.arp_cache_of("cam")


def test_injected_reply_poisons_cache():
    lan = SimLan(parse_scenario(BASIC))
    lan.run_until(0.5)
    evil = MacAddr.parse("02:00:00:00:00:99")
    spoof = ArpPacket(ARP_OP_REPLY, evil, Ipv4Addr("192.168.1.1"),
                      MacAddr.parse("aa:00:00:00:00:02"), Ipv4Addr("192.168.1.2"))
    lan.inject(arp_frame(spoof, eth_src=evil, eth_dst=spoof.target_mac, ts=lan.now))
    assert lan.arp_cache_of("cam")[Ipv4Addr("192.168.1.1")] == evil


def test_frame_to_unowned_mac_is_dropped():
    lan = SimLan(parse_scenario(BASIC))
    lan.run_until(0.5)
    ghost = MacAddr.parse("02:ab:cd:ef:00:01")
    spoof = ArpPacket(ARP_OP_REPLY, ghost, Ipv4Addr("192.168.1.1"),
                      MacAddr.parse("aa:00:00:00:00:02"), Ipv4Addr("192.168.1.2"))
    lan.inject(arp_frame(spoof, eth_src=ghost, eth_dst=spoof.target_mac, ts=lan.now))
    lan.run_until(10.0)
    drops = [r for r in lan.log if r.delivered_to == ()]
    assert len(drops) == 1 and drops[0].frame.dst_mac == ghost
    assert lan.hosts["srv"].received == []


def test_dns_event_answered_by_gateway():
    text = BASIC + "at 2.0 tv dns srv\n"
    lan = SimLan(parse_scenario(text.replace("duration 10", "duration 12")))
    lan.run_until(12.0)
    answers = [r for r in lan.log
               if r.delivered_to == ("tv",) and r.frame.ethertype == ETHERTYPE_IPV4]
    assert len(answers) == 1
    header = parse_ipv4(answers[0].frame.payload)
    dg = parse_udp(header.payload)
    assert header.src_ip == Ipv4Addr("192.168.1.1") and dg.src_port == 53
    assert Ipv4Addr("93.184.216.34").packed in dg.payload


def test_tls_event_sends_hello_then_data():
    text = BASIC + "at 3.0 cam tls 93.184.216.34 shady.example 500\n"
    lan = SimLan(parse_scenario(text.replace("duration 10", "duration 12")))
    lan.run_until(12.0)
    srv = lan.hosts["srv"]
    tcp_arrivals = [r for r in srv.received if r[2] == 6]
    assert len(tcp_arrivals) == 2
    assert tcp_arrivals[1][3] == 500
    assert tcp_arrivals[0][3] > 0  # the hello itself


def test_every_emission_logged_exactly_once_and_run_is_deterministic():
    text = BASIC + "at 2.0 tv dns srv\nat 3.0 cam tls 93.184.216.34 shady.example 500\n"
    sc = parse_scenario(text.replace("duration 10", "duration 12"))
    runs = []
    for _ in range(2):
        lan = SimLan(sc)
        lan.run_until(12.0)
        runs.append(lan.log)
    assert runs[0] == runs[1]
    for rec in runs[0]:
        assert isinstance(rec.delivered_to, tuple)
        assert rec.link in ("lan", "wan")


def test_export_pcap_round_trips_log(tmp_path):
    from leakscope.pcapio import replay_pcap

    lan = SimLan(parse_scenario(BASIC))
    lan.run_until(10.0)
    path = tmp_path / "all.pcap"
    n = lan.export_pcap(path, link=None)
    assert n == len(lan.log) > 0
    assert [f.payload for f in replay_pcap(path)] == [r.frame.payload for r in lan.log]


def test_export_pcap_default_is_lan_segment_only(tmp_path):
    from leakscope.pcapio import replay_pcap

    lan = SimLan(parse_scenario(BASIC))
    lan.run_until(10.0)
    path = tmp_path / "lan.pcap"
    n = lan.export_pcap(path)
    lan_frames = [r.frame.payload for r in lan.log if r.link == "lan"]
    assert n == len(lan_frames)
    assert any(r.link == "wan" for r in lan.log)  # scenario does cross the gateway
    assert [f.payload for f in replay_pcap(path)] == lan_frames
