"""Device identification tables, registry semantics, and active ARP scanning."""

import logging

import pytest

from leakscope.backends import SimBackend
from leakscope.discovery import (
    UNKNOWN_NAME,
    UNKNOWN_VENDOR,
    DeviceRegistry,
    NameMap,
    OuiTable,
    arp_scan,
    identify,
    load_name_map,
    load_oui_table,
)
from leakscope.netmodel import Ipv4Addr, MacAddr, oui_of
from leakscope.simnet import SimLan, parse_scenario

SCENARIO = """
host gw   aa:00:00:00:00:01 192.168.1.1   gateway
host ana  aa:00:00:00:00:99 192.168.1.50  analyzer
host cam  02:11:22:00:00:01 192.168.1.2   device
host tv   0a:ab:cd:00:00:02 192.168.1.3   device
host hub  04:33:44:00:00:03 192.168.1.4   device
host lamp 04:33:44:00:00:04 192.168.1.5   device
host plug 06:55:66:00:00:05 192.168.1.6   device
duration 30
"""

OUI_TEXT = """
# vendor prefixes
02:11:22  Acme Cameras
04:33:44  HomeWorks
"""

NAMES_TEXT = """
02:11:22  porch camera
0a:ab:cd  living room tv
"""


@pytest.fixture
def oui_table(tmp_path):
    p = tmp_path / "oui.txt"
    p.write_text(OUI_TEXT)
    return load_oui_table(p)


@pytest.fixture
def name_map(tmp_path):
    p = tmp_path / "names.txt"
    p.write_text(NAMES_TEXT)
    return load_name_map(p)


def make_lan():
    return SimLan(parse_scenario(SCENARIO))


def make_registry(oui=None, names=None):
    return DeviceRegistry(
        oui_table=oui or OuiTable({}),
        name_map=names or NameMap({}),
        analyzer_mac=MacAddr.parse("aa:00:00:00:00:99"),
        analyzer_ip=Ipv4Addr("192.168.1.50"),
        gateway_ip=Ipv4Addr("192.168.1.1"),
    )


# ------------------------------------------------------------------- tables

def test_oui_lookup_and_fallback(oui_table):
    assert oui_table.vendor(oui_of(MacAddr.parse("02:11:22:ab:cd:ef"))) == "Acme Cameras"
    assert oui_table.vendor(oui_of(MacAddr.parse("ff:ff:00:00:00:01"))) == UNKNOWN_VENDOR


def test_table_duplicate_last_wins_and_warns(tmp_path, caplog):
    p = tmp_path / "oui.txt"
    p.write_text("02:11:22 First\n02:11:22 Second\n")
    with caplog.at_level(logging.WARNING):
        table = load_oui_table(p)
    assert table.vendor(oui_of(MacAddr.parse("02:11:22:00:00:00"))) == "Second"
    assert any("duplicate" in r.message.lower() for r in caplog.records)


def test_table_parse_error_names_file_and_line(tmp_path):
    p = tmp_path / "oui.txt"
    p.write_text("02:11:22 Fine\nnot-a-prefix Vendor\n")
    with pytest.raises(ValueError) as err:
        load_oui_table(p)
    assert "oui.txt" in str(err.value)
    assert "2" in str(err.value)


def test_identify_fallback_chain(oui_table, name_map):
    # both tables hit
    vendor, name = identify(MacAddr.parse("02:11:22:00:00:01"), oui_table, name_map)
    assert (vendor, name) == ("Acme Cameras", "porch camera")
    # name map hit without a vendor entry
    vendor, name = identify(MacAddr.parse("0a:ab:cd:00:00:02"), oui_table, name_map)
    assert (vendor, name) == (UNKNOWN_VENDOR, "living room tv")
    # vendor only: name falls back to vendor
    vendor, name = identify(MacAddr.parse("04:33:44:00:00:03"), oui_table, name_map)
    assert (vendor, name) == ("HomeWorks", "HomeWorks")
    # nothing known
    vendor, name = identify(MacAddr.parse("ee:ee:ee:00:00:01"), oui_table, name_map)
    assert (vendor, name) == (UNKNOWN_VENDOR, UNKNOWN_NAME)


# ----------------------------------------------------------------- registry

def test_registry_upsert_and_reassignment():
    reg = make_registry()
    mac = MacAddr.parse("02:11:22:00:00:01")
    reg.upsert(mac, Ipv4Addr("192.168.1.2"), now=1.0)
    reg.upsert(mac, Ipv4Addr("192.168.1.7"), now=5.0)  # DHCP gave it a new IP
    assert len(reg.devices()) == 1
    rec = reg.devices()[0]
    assert rec.ip == Ipv4Addr("192.168.1.7")
    assert rec.first_seen == 1.0 and rec.last_seen == 5.0
    assert reg.by_ip(Ipv4Addr("192.168.1.2")) is None


def test_registry_ip_takeover_evicts_stale_holder():
    reg = make_registry()
    a = MacAddr.parse("02:11:22:00:00:01")
    b = MacAddr.parse("02:11:22:00:00:02")
    reg.upsert(a, Ipv4Addr("192.168.1.2"), now=1.0)
    reg.upsert(b, Ipv4Addr("192.168.1.2"), now=2.0)
    assert reg.by_ip(Ipv4Addr("192.168.1.2")).mac == b
    # at most one record may claim an IP, so the stale holder is gone
    assert reg.by_mac(a) is None
    assert len(reg.devices()) == 1


def test_registry_ip_swap_between_known_devices():
    reg = make_registry()
    a = MacAddr.parse("02:11:22:00:00:01")
    b = MacAddr.parse("02:11:22:00:00:02")
    reg.upsert(a, Ipv4Addr("192.168.1.2"), now=1.0)
    reg.upsert(b, Ipv4Addr("192.168.1.3"), now=1.0)
    reg.upsert(b, Ipv4Addr("192.168.1.2"), now=2.0)  # b moves onto a's IP
    assert reg.by_ip(Ipv4Addr("192.168.1.2")).mac == b
    assert reg.by_mac(a) is None
    assert len(reg.devices()) == 1


def test_registry_ignores_analyzer_and_isolates_gateway():
    reg = make_registry()
    assert reg.upsert(MacAddr.parse("aa:00:00:00:00:99"),
                      Ipv4Addr("192.168.1.50"), now=0.0) is None
    reg.upsert(MacAddr.parse("aa:00:00:00:00:01"), Ipv4Addr("192.168.1.1"), now=0.0)
    assert reg.devices() == []
    gw = reg.gateway()
    assert gw is not None and not gw.monitored and gw.name == "gateway"


def test_gateway_mac_with_foreign_ip_stays_in_the_gateway_slot():
    # NAT relaying puts remote source IPs behind the gateway's MAC
    reg = make_registry()
    gw_mac = MacAddr.parse("aa:00:00:00:00:01")
    reg.upsert(gw_mac, Ipv4Addr("192.168.1.1"), now=0.0)
    record = reg.upsert(gw_mac, Ipv4Addr("203.0.113.9"), now=5.0)
    assert record is reg.gateway()
    assert record.ip == Ipv4Addr("192.168.1.1")  # slot keeps the true address
    assert record.last_seen == 5.0
    assert reg.devices() == []


def test_is_lan_infrastructure():
    reg = make_registry()
    assert reg.is_lan_infrastructure(Ipv4Addr("192.168.1.1"))
    assert reg.is_lan_infrastructure(Ipv4Addr("192.168.1.50"))
    assert not reg.is_lan_infrastructure(Ipv4Addr("8.8.8.8"))


# --------------------------------------------------------------------- scan

def test_arp_scan_finds_all_devices(oui_table, name_map):
    lan = make_lan()
    backend = SimBackend(lan)
    reg = DeviceRegistry(oui_table, name_map, backend.analyzer_mac,
                         backend.analyzer_ip, Ipv4Addr("192.168.1.1"))
    found = arp_scan(backend, "192.168.1.0/28", reg, timeout=2.0)
    ids = sorted(d.device_id for d in found)
    assert ids == sorted([
        "021122000001", "0aabcd000002", "043344000003",
        "043344000004", "065566000005",
    ])
    assert reg.gateway() is not None
    cam = reg.get("021122000001")
    assert cam.vendor == "Acme Cameras" and cam.name == "porch camera"
    tv = reg.get("0aabcd000002")
    assert tv.vendor == UNKNOWN_VENDOR and tv.name == "living room tv"
    hub = reg.get("043344000003")
    assert hub.vendor == "HomeWorks" and hub.name == "HomeWorks"
    plug = reg.get("065566000005")
    assert plug.vendor == UNKNOWN_VENDOR and plug.name == UNKNOWN_NAME


def test_arp_scan_empty_subnet_returns_nothing():
    scenario = parse_scenario(
        "host gw aa:00:00:00:00:01 192.168.1.1 gateway\n"
        "host ana aa:00:00:00:00:99 192.168.1.50 analyzer\n"
        "duration 10\n"
    )
    backend = SimBackend(SimLan(scenario))
    reg = make_registry()
    assert arp_scan(backend, "192.168.1.0/28", reg, timeout=1.0) == []


def test_arp_scan_idempotent(oui_table, name_map):
    lan = make_lan()
    backend = SimBackend(lan)
    reg = DeviceRegistry(oui_table, name_map, backend.analyzer_mac,
                         backend.analyzer_ip, Ipv4Addr("192.168.1.1"))
    first = arp_scan(backend, "192.168.1.0/28", reg, timeout=2.0)
    second = arp_scan(backend, "192.168.1.0/28", reg, timeout=2.0)
    assert [d.device_id for d in first] == [d.device_id for d in second]
    assert len(reg.devices()) == 5


def test_arp_scan_rejects_huge_subnet():
    backend = SimBackend(make_lan())
    reg = make_registry()
    with pytest.raises(ValueError):
        arp_scan(backend, "10.0.0.0/8", reg)
