"""Deterministic testbed for Slow Read denial of service from cloud-hosted
virtual IPs, and for a two-zone, provider-grouped eviction defense."""

__version__ = "0.1.0"
