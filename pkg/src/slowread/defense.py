"""Two-zone overflow routing and provider-grouped slow-connection eviction.

The analysis sees connections only through :class:`DefenseView`, which has
no ground-truth label and no workload identity.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import kernels
from .errors import BadParam
from .netmodel import UNKNOWN, ProviderMap, ip_to_text
from .server import CloseReason, Connection, State, Zone, close
from .simkernel import seconds

UNOBSERVED = None


class GroupBy(str, Enum):
    SOURCE_IP = "source_ip"
    PROVIDER = "provider"
    BOTH = "both"


@dataclass(frozen=True)
class AnalysisConfig:
    slow_threshold: float = 100.0  # bytes/s
    min_observation: int = seconds(10)
    group_by: GroupBy = GroupBy.BOTH
    group_threshold: int = 5
    analysis_period: int = seconds(5)
    include_unknown_provider: bool = False
    always_on: bool = False
    analyze_zones: tuple[int, ...] = (1, 2)

    def __post_init__(self):
        if self.slow_threshold <= 0:
            raise BadParam("slow_threshold must be > 0")
        if self.group_threshold < 1:
            raise BadParam("group_threshold must be >= 1")
        if self.analysis_period <= 0:
            raise BadParam("analysis_period must be > 0")
        if self.min_observation < 0:
            raise BadParam("min_observation must be >= 0")


@dataclass(frozen=True)
class ViewRow:
    id: int
    src_ip: int
    opened_at: int
    delivered: int
    last_progress_at: int


@dataclass(frozen=True, eq=False)
class DefenseView:
    """Column snapshot of the active connections of one zone."""

    ids: np.ndarray
    src_ip: np.ndarray
    opened_at: np.ndarray
    delivered: np.ndarray
    last_progress_at: np.ndarray

    @classmethod
    def of(cls, conns: Sequence[Connection]) -> "DefenseView":
        conns = [c for c in conns if c.state is State.TRANSFERRING]
        cols = [np.array(col, dtype=np.int64) for col in
                zip(*[(c.id, c.src_ip, c.opened_at, c.delivered, c.last_progress_at) for c in conns])]
        if not cols:
            cols = [np.zeros(0, dtype=np.int64) for _ in range(5)]
        return cls(*cols)

    @classmethod
    def from_rows(cls, rows: Sequence[ViewRow]) -> "DefenseView":
        cols = [np.array([getattr(r, f) for r in rows], dtype=np.int64)
                for f in ("id", "src_ip", "opened_at", "delivered", "last_progress_at")]
        return cls(*cols)

    def __len__(self):
        return len(self.ids)

    def rows(self):
        for vals in zip(self.ids.tolist(), self.src_ip.tolist(), self.opened_at.tolist(),
                        self.delivered.tolist(), self.last_progress_at.tolist()):
            yield ViewRow(*vals)

    def to_json(self) -> dict:
        return {"ids": self.ids.tolist(), "src_ip": self.src_ip.tolist(),
                "opened_at": self.opened_at.tolist(), "delivered": self.delivered.tolist(),
                "last_progress_at": self.last_progress_at.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "DefenseView":
        return cls(*(np.array(d[k], dtype=np.int64)
                     for k in ("ids", "src_ip", "opened_at", "delivered", "last_progress_at")))


@dataclass(frozen=True)
class DropSet:
    drops: tuple[tuple[int, str], ...] = ()
    groups: dict[str, int] = field(default_factory=dict)  # qualifying groups only
    observed: int = 0
    slow: int = 0

    @property
    def ids(self) -> list[int]:
        return [cid for cid, _ in self.drops]

    def __len__(self):
        return len(self.drops)


def route(zones: Sequence[Zone]) -> int | None:
    """Zone 1 while it has a free slot, then zone 2; None when both are full."""
    for zone in zones:
        if zone.has_free_slot():
            return zone.id
    return None


def throughput_of(row: ViewRow, now: int, cfg: AnalysisConfig):
    """Average delivered bytes/s since admission, or ``UNOBSERVED``."""
    elapsed = now - row.opened_at
    if elapsed < cfg.min_observation or elapsed <= 0:
        return UNOBSERVED
    return row.delivered * 1e6 / elapsed


def classify_slow(row: ViewRow, now: int, cfg: AnalysisConfig) -> bool:
    elapsed = now - row.opened_at
    if elapsed < cfg.min_observation or elapsed <= 0:
        return False
    # cross-multiplied so the comparison matches the batch kernel bit for bit
    return row.delivered * 1e6 < cfg.slow_threshold * elapsed


def _partition(keys: list[str], members: list[int], k: int) -> dict[str, list[int]]:
    groups: dict[str, list[int]] = {}
    for key, cid in zip(keys, members):
        groups.setdefault(key, []).append(cid)
    return {key: ids for key, ids in groups.items() if len(ids) >= k}


def analysis_cycle(view: DefenseView, pmap: ProviderMap, cfg: AnalysisConfig, now: int) -> DropSet:
    """Select every slow connection that belongs to a large enough group.

    Groups are keyed ``provider:<id>`` and/or ``ip:<a.b.c.d>``. A connection
    qualifying under both keys is reported once, under its provider key.
    """
    _, observed, slow = kernels.throughput_mask(
        view.opened_at, view.delivered, now, cfg.min_observation, cfg.slow_threshold)
    idx = np.flatnonzero(slow)
    slow_ids = view.ids[idx].tolist()
    slow_ips = view.src_ip[idx].tolist()
    k = cfg.group_threshold
    qualifying: dict[str, list[int]] = {}
    if cfg.group_by in (GroupBy.PROVIDER, GroupBy.BOTH):
        keys, members = [], []
        for cid, ip in zip(slow_ids, slow_ips):
            prov = pmap.provider_of(ip)
            if prov == UNKNOWN and not cfg.include_unknown_provider:
                continue
            keys.append(f"provider:{prov}")
            members.append(cid)
        qualifying.update(_partition(keys, members, k))
    if cfg.group_by in (GroupBy.SOURCE_IP, GroupBy.BOTH):
        keys = [f"ip:{ip_to_text(ip)}" for ip in slow_ips]
        qualifying.update(_partition(keys, slow_ids, k))
    chosen: dict[int, str] = {}
    for key in sorted(qualifying, key=lambda s: (not s.startswith("provider:"), s)):
        for cid in qualifying[key]:
            chosen.setdefault(cid, key)
    drops = tuple(sorted(chosen.items()))
    groups = {key: len(ids) for key, ids in sorted(qualifying.items())}
    return DropSet(drops, groups, int(observed.sum()), len(slow_ids))


def apply_drops(zones: Sequence[Zone], drops: DropSet, now: int) -> tuple[int, int]:
    """Close every listed connection still pooled; return ``(closed, skipped)``."""
    closed = skipped = 0
    for cid, _ in drops.drops:
        for zone in zones:
            conn = zone.pool.get(cid)
            if conn is not None and conn.state is State.TRANSFERRING:
                close(zone, conn, CloseReason.MITIGATION, now)
                closed += 1
                break
        else:
            skipped += 1
    return closed, skipped
