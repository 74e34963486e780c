"""LAN traffic interposition toolkit: discovery, ARP interception, metering, blocking."""

__version__ = "0.1.0"
