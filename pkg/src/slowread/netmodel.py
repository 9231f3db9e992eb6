"""IPv4 addresses, CIDR blocks, provider attribution and virtual-IP allocation.

Addresses are plain ``int`` values in ``[0, 2**32)``. Provider lookup is a
longest-prefix match over a static table.
"""
from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BlockExhausted, MalformedCidr, NonZeroHostBits
from .simkernel import SplitMix64, draw_uniform_int

UNKNOWN = "Unknown"


def ip_from_text(text: str) -> int:
    try:
        return int(ipaddress.IPv4Address(text))
    except ipaddress.AddressValueError as exc:
        raise MalformedCidr(f"bad IPv4 address {text!r}") from exc


def ip_to_text(ip: int) -> str:
    return str(ipaddress.IPv4Address(ip))


def _mask(prefix_len: int) -> int:
    return (0xFFFFFFFF << (32 - prefix_len)) & 0xFFFFFFFF if prefix_len else 0


@dataclass(frozen=True, order=True)
class Cidr:
    base: int
    prefix_len: int

    def __post_init__(self):
        if not 0 <= self.prefix_len <= 32:
            raise MalformedCidr(f"prefix length {self.prefix_len} out of range")
        if self.base & ~_mask(self.prefix_len) & 0xFFFFFFFF:
            raise NonZeroHostBits(f"{ip_to_text(self.base)}/{self.prefix_len} has host bits set")

    @property
    def size(self) -> int:
        return 1 << (32 - self.prefix_len)

    @property
    def usable(self) -> int:
        """Allocatable host count; network and broadcast excluded up to /30."""
        if self.prefix_len >= 31:
            return self.size
        return self.size - 2

    def first_usable(self) -> int:
        return self.base if self.prefix_len >= 31 else self.base + 1

    def __contains__(self, ip: int) -> bool:
        return (ip & _mask(self.prefix_len)) == self.base

    def __str__(self):
        return f"{ip_to_text(self.base)}/{self.prefix_len}"


def parse_cidr(text: str) -> Cidr:
    addr, sep, plen = text.strip().partition("/")
    if not sep or not plen.isdigit():
        raise MalformedCidr(f"expected a.b.c.d/len, got {text!r}")
    return Cidr(ip_from_text(addr), int(plen))


@dataclass
class ProviderMap:
    """CIDR -> provider id table with longest-prefix lookup.

    Overlapping entries are allowed; an exact duplicate prefix keeps the
    last entry added.
    """

    entries: list[tuple[Cidr, str]] = field(default_factory=list)

    def __post_init__(self):
        self._by_len: dict[int, dict[int, str]] = {}
        for cidr, provider in self.entries:
            self._by_len.setdefault(cidr.prefix_len, {})[cidr.base] = provider
        self._lengths = sorted(self._by_len, reverse=True)

    def add(self, cidr: Cidr, provider: str) -> None:
        self.entries.append((cidr, provider))
        self.__post_init__()

    def provider_of(self, ip: int) -> str:
        for plen in self._lengths:
            hit = self._by_len[plen].get(ip & _mask(plen))
            if hit is not None:
                return hit
        return UNKNOWN

    @classmethod
    def parse(cls, text: str) -> "ProviderMap":
        entries = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise MalformedCidr(f"line {lineno}: expected '<cidr> <provider-id>', got {raw!r}")
            try:
                entries.append((parse_cidr(parts[0]), parts[1]))
            except MalformedCidr as exc:
                raise type(exc)(f"line {lineno}: {exc}") from None
        return cls(entries)

    @classmethod
    def load(cls, path) -> "ProviderMap":
        return cls.parse(Path(path).read_text(encoding="utf-8"))


def provider_of(ip: int, pmap: ProviderMap) -> str:
    return pmap.provider_of(ip)


def allocate_virtual_ips(block: Cidr, n: int, rng: SplitMix64) -> list[int]:
    """Draw ``n`` distinct usable addresses from ``block``.

    Partial Fisher-Yates over the usable host range, kept sparse in a dict
    so cost is O(n) regardless of block size.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    cap = block.usable
    if n > cap:
        raise BlockExhausted(f"{n} addresses requested, {block} has {cap} usable")
    first = block.first_usable()
    swapped: dict[int, int] = {}
    out = []
    for i in range(n):
        j = draw_uniform_int(rng, i, cap - 1)
        vj = swapped.get(j, j)
        swapped[j] = swapped.get(i, i)
        out.append(first + vj)
    return out
