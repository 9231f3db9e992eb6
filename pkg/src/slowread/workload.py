"""Traffic generators: legitimate Poisson clients, cloud-launched Slow Read
waves, and periodic availability probes.

Every random parameter is drawn here, at scenario construction, so the
initial event queue fully determines a run.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import BadParam
from .netmodel import Cidr, ProviderMap, allocate_virtual_ips, ip_from_text
from .server import ATTACK, LEGIT
from .simkernel import SplitMix64, draw_uniform_int, seconds


@dataclass(frozen=True)
class ConnectSpec:
    """Everything known about a connection when its first SYN arrives."""

    at: int
    src_ip: int
    recv_window: int
    read_rate: int
    response_total: int
    truth_label: str = LEGIT
    is_probe: bool = False
    id: int = -1


def _check_range(name, rng_pair, lo_bound=0):
    lo, hi = rng_pair
    if lo > hi or lo < lo_bound:
        raise BadParam(f"{name} must satisfy {lo_bound} <= lo <= hi, got {rng_pair}")


@dataclass(frozen=True)
class LegitWorkload:
    arrival_rate: float
    read_rate_range: tuple[int, int]
    response_size_range: tuple[int, int]
    src_block: Cidr
    slow_fraction: float = 0.05
    window_range: tuple[int, int] = (1024, 65535)
    # "attack-like" parameters for the slow_fraction share of clients
    slow_read_rate_range: tuple[int, int] = (5, 20)
    slow_window_range: tuple[int, int] = (8, 16)

    def __post_init__(self):
        if self.arrival_rate < 0:
            raise BadParam("arrival_rate must be >= 0")
        if not 0.0 <= self.slow_fraction <= 1.0:
            raise BadParam("slow_fraction must be in [0, 1]")
        _check_range("read_rate_range", self.read_rate_range, 1)
        _check_range("response_size_range", self.response_size_range, 0)
        _check_range("window_range", self.window_range, 1)
        _check_range("slow_read_rate_range", self.slow_read_rate_range, 1)
        _check_range("slow_window_range", self.slow_window_range, 1)
        if self.src_block.usable < 1:
            raise BadParam("src_block has no usable hosts")


@dataclass(frozen=True)
class AttackWorkload:
    count: int
    provider_block: Cidr
    window_range: tuple[int, int] = (8, 16)
    read_rate: int = 5
    launch_window: tuple[int, int] = (0, seconds(10))
    response_size: int = 1_000_000

    def __post_init__(self):
        if self.count < 0:
            raise BadParam("count must be >= 0")
        lo, hi = self.window_range
        if not 1 <= lo <= hi <= 65535:
            raise BadParam("window_range must lie within [1, 65535]")
        if self.read_rate <= 0:
            raise BadParam("read_rate must be > 0")
        start, end = self.launch_window
        if not 0 <= start <= end:
            raise BadParam("launch_window must satisfy 0 <= start <= end")


@dataclass(frozen=True)
class ProbeWorkload:
    period: int
    read_rate: int = 1_000_000
    response_size: int = 10_000
    recv_window: int = 65535
    src_ip: int = ip_from_text("192.0.2.1")

    def __post_init__(self):
        if self.period <= 0:
            raise BadParam("period must be > 0")


def build_legit_arrivals(w: LegitWorkload, horizon: int, rng: SplitMix64) -> list[ConnectSpec]:
    if horizon <= 0:
        raise BadParam("horizon must be > 0")
    out = []
    if w.arrival_rate == 0:
        return out
    t = 0
    first = w.src_block.first_usable()
    while True:
        t += seconds(rng.exponential(w.arrival_rate))
        if t > horizon:
            break
        slow = rng.random() < w.slow_fraction
        rates = w.slow_read_rate_range if slow else w.read_rate_range
        windows = w.slow_window_range if slow else w.window_range
        rate = draw_uniform_int(rng, *rates)
        window = draw_uniform_int(rng, *windows)
        size = draw_uniform_int(rng, *w.response_size_range)
        ip = first + draw_uniform_int(rng, 0, w.src_block.usable - 1)
        out.append(ConnectSpec(t, ip, window, rate, size, LEGIT))
    return out


def build_attack_wave(w: AttackWorkload, pmap: ProviderMap | None, rng: SplitMix64) -> list[ConnectSpec]:
    """One VM's wave: ``count`` arrivals evenly spaced over the launch window,
    each from a distinct virtual IP of the provider block."""
    ips = allocate_virtual_ips(w.provider_block, w.count, rng)
    start, end = w.launch_window
    span = end - start
    out = []
    for i, ip in enumerate(ips):
        at = start + (i * span) // w.count
        window = draw_uniform_int(rng, *w.window_range)
        out.append(ConnectSpec(at, ip, window, w.read_rate, w.response_size, ATTACK))
    return out


def build_probes(w: ProbeWorkload, horizon: int) -> list[ConnectSpec]:
    return [
        ConnectSpec(k * w.period, w.src_ip, w.recv_window, w.read_rate, w.response_size, LEGIT, True)
        for k in range(1, horizon // w.period + 1)
    ]


def merge_arrivals(*streams: list[ConnectSpec]) -> list[ConnectSpec]:
    """Stable time-merge of workload streams; ids follow the merged order."""
    tagged = [(s.at, si, i, s) for si, stream in enumerate(streams) for i, s in enumerate(stream)]
    tagged.sort(key=lambda t: t[:3])
    return [replace(s, id=n) for n, (*_, s) in enumerate(tagged)]
