"""Command line entry points.

`run` hosts the service; every other subcommand except `replay` is a thin
REST client against a running instance. Exit codes: 0 success, 1 usage or
configuration problem, 2 remote API error (including connection refused).
"""

from __future__ import annotations

import argparse
import ipaddress
import json
import os
import random
import sys
import time
import urllib.error
import urllib.request
from pathlib import Path

from .analyzer import Blocklist, CounterStore, load_blocklist
from .api import DEFAULT_LISTEN, ApiContext, serve_background
from .backends import (
    KIND_LIVE,
    KIND_PCAP,
    KIND_SIM,
    BackendConfig,
    BackendError,
    open_backend,
)
from .discovery import DeviceRegistry, NameMap, OuiTable, load_name_map, load_oui_table
from .netmodel import Ipv4Addr
from .policy import PolicyStore
from .service import Service
from .simnet import ScenarioError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_REMOTE = 2

DEFAULT_API = "http://127.0.0.1:8089"


class ConfigError(Exception):
    """Bad flags or unreadable inputs; exits 1."""


class RemoteError(Exception):
    """The API refused or was unreachable; exits 2."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class _Parser(argparse.ArgumentParser):
    # usage problems must exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -------------------------------------------------------------- REST client

def api_base(args) -> str:
    return getattr(args, "api", None) or os.environ.get("LEAKSCOPE_API") or DEFAULT_API


def api_call(base: str, method: str, path: str, body: dict | None = None) -> dict:
    url = base.rstrip("/") + path
    data = json.dumps(body).encode() if body is not None else None
    headers = {"Content-Type": "application/json"} if data else {}
    req = urllib.request.Request(url, data=data, method=method, headers=headers)
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return json.load(resp)
    except urllib.error.HTTPError as exc:
        try:
            payload = json.load(exc)
        except ValueError:
            payload = {"code": "bad_request", "message": str(exc.reason)}
        raise RemoteError(payload.get("code", "error"), payload.get("message", ""))
    except urllib.error.URLError as exc:
        raise RemoteError("connection", f"cannot reach {url}: {exc.reason}")


# ---------------------------------------------------------------- run helpers

def _load_tables(args) -> tuple[OuiTable, NameMap]:
    try:
        oui = load_oui_table(args.oui_table) if args.oui_table else OuiTable({})
        names = load_name_map(args.name_map) if args.name_map else NameMap({})
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc))
    return oui, names


def _load_blocklist(args) -> Blocklist:
    if not args.blocklist:
        return Blocklist(frozenset())
    try:
        return load_blocklist(args.blocklist)
    except OSError as exc:
        raise ConfigError(str(exc))


def _open_backend(args):
    config = BackendConfig(kind=args.backend, scenario=args.scenario,
                           pcap=args.pcap, interface=args.interface)
    try:
        return open_backend(config)
    except (BackendError, ScenarioError, FileNotFoundError, PermissionError) as exc:
        raise ConfigError(str(exc))


def _gateway_ip(args, backend) -> Ipv4Addr | None:
    if args.gateway_ip:
        try:
            return Ipv4Addr(args.gateway_ip)
        except ValueError as exc:
            raise ConfigError(f"--gateway-ip: {exc}")
    if args.backend == KIND_SIM:
        return backend.lan.gateway.ip
    if args.backend == KIND_LIVE:
        raise ConfigError("--gateway-ip is required with the live backend")
    return None  # pcap: gateway labeling is optional


def _default_subnet(analyzer_ip: Ipv4Addr) -> str:
    return str(ipaddress.ip_network(f"{analyzer_ip}/24", strict=False))


def cmd_run(args) -> int:
    backend = _open_backend(args)
    oui, names = _load_tables(args)
    gateway_ip = _gateway_ip(args, backend)
    registry = DeviceRegistry(oui, names, backend.analyzer_mac,
                              backend.analyzer_ip, gateway_ip)
    policy = PolicyStore(device_exists=registry.has_device)
    store = CounterStore()
    rng = random.Random(args.seed) if args.seed is not None else None
    service = Service(backend, registry, policy, store, _load_blocklist(args),
                      spoof_interval=args.spoof_interval, rng=rng)

    if args.backend != KIND_PCAP:
        subnet = args.subnet or _default_subnet(backend.analyzer_ip)
        try:
            service.scan(subnet)
        except ValueError as exc:
            raise ConfigError(str(exc))
        print(f"scan of {subnet}: {len(registry.devices())} device(s)", flush=True)

    ctx = ApiContext(registry, policy, store, clock=backend.now,
                     ui_dir=Path(args.ui_dir) if args.ui_dir else None,
                     cors_origin=args.cors_origin)
    try:
        server, base = serve_background(ctx, args.listen)
    except OSError as exc:
        backend.close()
        raise ConfigError(f"cannot listen on {args.listen}: {exc}")
    print(f"serving API at {base}", flush=True)

    until = None
    if args.backend == KIND_SIM:
        until = args.duration if args.duration is not None else backend.lan.scenario.duration
    try:
        service.run(until)
        if getattr(backend, "error", None) is not None:
            print(f"capture ended early: {backend.error}", file=sys.stderr)
        if args.once:
            return EXIT_OK
        print("capture finished; holding final snapshot (Ctrl-C to exit)", flush=True)
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        return EXIT_OK
    finally:
        service.stop()
        server.shutdown()
        backend.close()


# ------------------------------------------------------------ client commands

def cmd_devices(args) -> int:
    data = api_call(api_base(args), "GET", "/devices")
    if args.json:
        print(json.dumps(data, indent=2))
        return EXIT_OK
    rows = data["devices"]
    if not rows:
        print("no devices")
        return EXIT_OK
    widths = (12, 22, 18, 15)
    print(f"{'DEVICE_ID':<{widths[0]}}  {'NAME':<{widths[1]}}  "
          f"{'VENDOR':<{widths[2]}}  {'IP':<{widths[3]}}  BLOCKED")
    for d in rows:
        print(f"{d['device_id']:<{widths[0]}}  {d['name']:<{widths[1]}.{widths[1]}}  "
              f"{d['vendor']:<{widths[2]}.{widths[2]}}  {d['ip']:<{widths[3]}}  "
              f"{'yes' if d['blocked'] else 'no'}")
    return EXIT_OK


def _format_watch_line(snap: dict) -> str:
    parts = []
    for d in snap["devices"]:
        out_total = sum(s[1] for s in d["series"])
        in_total = sum(s[2] for s in d["series"])
        flags = "".join(("B" if d["blocked"] else "", f"T{d['tracker_count']}"
                         if d["tracker_count"] else ""))
        parts.append(f"{d['name']}[{out_total}/{in_total}{' ' + flags if flags else ''}]")
    return f"t={snap['generated_at']} " + " ".join(parts)


def cmd_watch(args) -> int:
    base = api_base(args)
    try:
        while True:
            snap = api_call(base, "GET", "/get_traffic")
            print(json.dumps(snap) if args.json else _format_watch_line(snap),
                  flush=True)
            time.sleep(args.interval)
    except KeyboardInterrupt:
        return EXIT_OK


def cmd_block(args) -> int:
    if args.forever:
        t0, t1 = 0, 0
    elif args.from_ is None and args.until is None:
        raise ConfigError("choose --forever or at least one of --from/--until")
    else:
        t0 = args.from_ or 0
        t1 = args.until or 0
    data = api_call(api_base(args), "GET", f"/block/{args.device_id}/{t0}/{t1}")
    print(json.dumps(data) if args.json else data["rule_id"])
    return EXIT_OK


def cmd_unblock(args) -> int:
    data = api_call(api_base(args), "DELETE", f"/rules/{args.rule_id}")
    print(json.dumps(data) if args.json else f"cancelled {data['rule_id']}")
    return EXIT_OK


# ----------------------------------------------------------------- replay

def cmd_replay(args) -> int:
    ns = argparse.Namespace(backend=KIND_PCAP, scenario=None, pcap=args.pcap,
                            interface=None, gateway_ip=args.gateway_ip,
                            oui_table=args.oui_table, name_map=args.name_map)
    backend = _open_backend(ns)
    oui, names = _load_tables(ns)
    gateway_ip = _gateway_ip(ns, backend)
    registry = DeviceRegistry(oui, names, None, None, gateway_ip)
    policy = PolicyStore(device_exists=registry.has_device)
    store = CounterStore()
    service = Service(backend, registry, policy, store, _load_blocklist(args),
                      intercept=False)
    service.run(None)
    if backend.error is not None:
        print(f"warning: capture truncated: {backend.error}", file=sys.stderr)

    devices = []
    for record in registry.devices():
        out_total, in_total = store.totals(record.device_id)
        devices.append({
            "device_id": record.device_id,
            "name": record.name,
            "bytes_out": out_total,
            "bytes_in": in_total,
            "tracker_hosts": sorted(store.tracker_hosts(record.device_id)),
        })
    report = {
        "pcap": str(args.pcap),
        "records": backend.stats.records,
        "malformed": backend.stats.malformed,
        "devices": devices,
    }
    if args.json:
        print(json.dumps(report, indent=2))
        return EXIT_OK
    print(f"{report['pcap']}: {report['records']} records"
          f" ({report['malformed']} malformed)")
    for d in devices:
        trackers = f"  trackers: {', '.join(d['tracker_hosts'])}" if d["tracker_hosts"] else ""
        print(f"  {d['device_id']}  {d['name']:<22.22}  out={d['bytes_out']}"
              f"  in={d['bytes_in']}{trackers}")
    return EXIT_OK


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="leakscope",
                     description="LAN device traffic monitor and blocker")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run the capture service and API")
    run.add_argument("--backend", choices=[KIND_LIVE, KIND_SIM, KIND_PCAP],
                     required=True)
    run.add_argument("--interface", help="live: capture interface")
    run.add_argument("--scenario", help="sim: scenario script path")
    run.add_argument("--pcap", help="pcap: capture file path")
    run.add_argument("--gateway-ip", help="gateway IPv4 (required for live)")
    run.add_argument("--oui-table", help="OUI prefix to vendor table")
    run.add_argument("--name-map", help="OUI prefix to friendly name table")
    run.add_argument("--blocklist", help="tracker domain list")
    run.add_argument("--listen", default=DEFAULT_LISTEN, help="API host:port")
    run.add_argument("--spoof-interval", type=float, default=2.0,
                     help="seconds between spoof cycles")
    run.add_argument("--subnet", help="CIDR to scan (default: analyzer /24)")
    run.add_argument("--duration", type=float,
                     help="sim: override the scenario's run length")
    run.add_argument("--seed", type=int, help="RNG seed for reproducible runs")
    run.add_argument("--cors-origin", help="value for Access-Control-Allow-Origin")
    run.add_argument("--ui-dir", help="directory served under /ui")
    run.add_argument("--once", action="store_true",
                     help="exit when a bounded run completes instead of serving on")
    run.set_defaults(func=cmd_run)

    def client(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--api", help=f"API base URL (or $LEAKSCOPE_API, "
                                     f"default {DEFAULT_API})")
        p.add_argument("--json", action="store_true", help="machine output")
        return p

    devices = client("devices", "list discovered devices")
    devices.set_defaults(func=cmd_devices)

    watch = client("watch", "poll and print traffic snapshots")
    watch.add_argument("--interval", type=float, default=1.0)
    watch.set_defaults(func=cmd_watch)

    block = client("block", "create a block rule for a device")
    block.add_argument("device_id")
    block.add_argument("--forever", action="store_true",
                       help="block immediately with no end")
    block.add_argument("--from", dest="from_", type=int, metavar="EPOCH",
                       help="block start (0 = now)")
    block.add_argument("--until", type=int, metavar="EPOCH",
                       help="block end (0 = never)")
    block.set_defaults(func=cmd_block)

    unblock = client("unblock", "cancel a rule by id")
    unblock.add_argument("rule_id")
    unblock.set_defaults(func=cmd_unblock)

    replay = sub.add_parser("replay", help="account a capture file, no service")
    replay.add_argument("pcap")
    replay.add_argument("--blocklist")
    replay.add_argument("--oui-table")
    replay.add_argument("--name-map")
    replay.add_argument("--gateway-ip")
    replay.add_argument("--json", action="store_true")
    replay.set_defaults(func=cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse exits itself on usage errors
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"leakscope: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RemoteError as exc:
        print(f"leakscope: {exc}", file=sys.stderr)
        return EXIT_REMOTE


if __name__ == "__main__":
    sys.exit(main())
