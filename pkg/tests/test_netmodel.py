import pytest
from hypothesis import given, strategies as st

from slowread.errors import BlockExhausted, MalformedCidr, NonZeroHostBits
from slowread.netmodel import (
    UNKNOWN, Cidr, ProviderMap, allocate_virtual_ips, ip_from_text, ip_to_text, parse_cidr,
    provider_of,
)
from slowread.simkernel import SplitMix64


def test_parse_cidr():
    c = parse_cidr("203.0.113.0/24")
    assert (ip_to_text(c.base), c.prefix_len) == ("203.0.113.0", 24)
    assert str(c) == "203.0.113.0/24"


def test_parse_cidr_host_bits():
    with pytest.raises(NonZeroHostBits):
        parse_cidr("203.0.113.7/24")


@pytest.mark.parametrize("bad", ["203.0.113.0", "203.0.113.0/33", "300.0.0.0/8", "x/8", ""])
def test_parse_cidr_malformed(bad):
    with pytest.raises(MalformedCidr):
        parse_cidr(bad)


def test_zero_prefix_matches_everything():
    c = parse_cidr("0.0.0.0/0")
    assert ip_from_text("8.8.8.8") in c and 0 in c and 2**32 - 1 in c


def test_usable_hosts():
    assert parse_cidr("10.0.0.0/24").usable == 254
    assert parse_cidr("10.0.0.0/22").usable == 1022
    assert parse_cidr("10.0.0.0/30").usable == 2


def test_provider_lookup():
    m = ProviderMap.parse("203.0.113.0/24 cloudX\n")
    assert provider_of(ip_from_text("203.0.113.7"), m) == "cloudX"


def test_longest_prefix_wins():
    m = ProviderMap.parse("10.0.0.0/8 A\n10.1.0.0/16 B\n")
    assert provider_of(ip_from_text("10.1.2.3"), m) == "B"
    assert provider_of(ip_from_text("10.2.2.3"), m) == "A"


def test_unknown_when_uncovered():
    m = ProviderMap.parse("10.0.0.0/8 A\n")
    assert provider_of(ip_from_text("192.0.2.1"), m) == UNKNOWN


def test_provider_table_errors_name_the_line():
    with pytest.raises(MalformedCidr, match="line 2"):
        ProviderMap.parse("# comment\n10.0.0.1/8 A\n")


def test_allocate_exhausted_block():
    with pytest.raises(BlockExhausted):
        allocate_virtual_ips(parse_cidr("198.51.100.0/24"), 600, SplitMix64(1))


def test_allocate_600_from_22():
    block = parse_cidr("203.0.112.0/22")
    ips = allocate_virtual_ips(block, 600, SplitMix64(20160101))
    assert len(ips) == len(set(ips)) == 600
    assert all(ip in block for ip in ips)
    assert all(ip not in (block.base, block.base + block.size - 1) for ip in ips)


def test_allocate_zero():
    assert allocate_virtual_ips(parse_cidr("10.0.0.0/24"), 0, SplitMix64(1)) == []


def test_shipped_table(scenarios_dir):
    m = ProviderMap.load(scenarios_dir / "providers.txt")
    assert m.provider_of(ip_from_text("203.0.113.9")) == "cloudX"
    assert m.provider_of(ip_from_text("100.64.9.1")) == "cloudZ-edge"
    assert m.provider_of(ip_from_text("100.65.0.1")) == "cloudZ"


@given(st.integers(8, 30), st.integers(0, 2**32 - 1), st.integers(0, 2**64 - 1), st.data())
def test_allocation_distinct_and_inside(plen, raw, seed, data):
    block = Cidr(raw & ~((1 << (32 - plen)) - 1) & 0xFFFFFFFF, plen)
    n = data.draw(st.integers(0, min(block.usable, 300)))
    ips = allocate_virtual_ips(block, n, SplitMix64(seed))
    assert len(set(ips)) == n
    assert all(ip in block for ip in ips)
    assert ips == allocate_virtual_ips(block, n, SplitMix64(seed))


def _brute_lpm(entries, ip):
    best = None
    for c, p in entries:
        mask = ((1 << c.prefix_len) - 1) << (32 - c.prefix_len)
        if ip & mask == c.base and (best is None or c.prefix_len > best[0]):
            best = (c.prefix_len, p)
    return UNKNOWN if best is None else best[1]


@given(st.lists(st.tuples(st.integers(0, 32), st.integers(0, 2**32 - 1)), max_size=12),
       st.lists(st.integers(0, 2**32 - 1), min_size=1, max_size=20))
def test_lpm_matches_linear_scan(raw_entries, ips):
    entries, seen = [], set()
    for i, (plen, raw) in enumerate(raw_entries):
        base = raw & (((1 << plen) - 1) << (32 - plen)) if plen else 0
        if (base, plen) in seen:
            continue
        seen.add((base, plen))
        entries.append((Cidr(base, plen), f"p{i}"))
    m = ProviderMap(entries)
    for ip in ips + [c.base for c, _ in entries]:
        assert m.provider_of(ip) == _brute_lpm(entries, ip)
