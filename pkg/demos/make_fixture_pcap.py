#!/usr/bin/env python3
"""Regenerate fixtures/sample.pcap from fixtures/lab5.scn.

The capture is the LAN segment of a plain scripted run (no interception),
so each logical packet appears exactly once. Deterministic: rerunning
produces a byte-identical file.
"""

from pathlib import Path

from leakscope.simnet import SimLan, load_scenario

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    scenario = load_scenario(ROOT / "fixtures" / "lab5.scn")
    lan = SimLan(scenario)
    lan.run_until(scenario.duration)
    out = ROOT / "fixtures" / "sample.pcap"
    n = lan.export_pcap(out)
    print(f"wrote {out} ({n} records)")


if __name__ == "__main__":
    main()
