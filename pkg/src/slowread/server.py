"""Victim web-server model: bounded connection pool, timeout policies and a
client-read-driven transfer model.

The server always has the next window's worth of data ready; the client's
read cadence is the bottleneck. One "read tick" is the instant the client
finishes draining a chunk of ``min(recv_window, remaining)`` bytes. Chunk
``k`` finishes at::

    opened_at + ceil(bytes_through_chunk_k * 1e6 / read_rate) + k * rtt

Computing tick times from cumulative bytes keeps the total transfer time
exactly equal to :func:`drain_time` even when ``chunk / rate`` is not a
whole number of microseconds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import BadParam, NotInPool, NotTransferring
from .simkernel import US_PER_S


class State(str, Enum):
    PENDING = "Pending"
    TRANSFERRING = "Transferring"
    COMPLETE = "Complete"
    DROPPED_TIMEOUT = "DroppedTimeout"
    DROPPED_MITIGATION = "DroppedMitigation"
    REJECTED_FULL = "RejectedFull"


TERMINAL = (State.COMPLETE, State.DROPPED_TIMEOUT, State.DROPPED_MITIGATION, State.REJECTED_FULL)


class Policy(str, Enum):
    IDLE = "idle"
    ABSOLUTE = "absolute"


class CloseReason(str, Enum):
    TIMEOUT = "timeout"
    MITIGATION = "mitigation"
    COMPLETE = "complete"


_CLOSE_STATE = {
    CloseReason.TIMEOUT: State.DROPPED_TIMEOUT,
    CloseReason.MITIGATION: State.DROPPED_MITIGATION,
    CloseReason.COMPLETE: State.COMPLETE,
}


class Admission(str, Enum):
    ADMITTED = "admitted"
    REJECTED_FULL = "rejected"


LEGIT = "legit"
ATTACK = "attack"


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass(slots=True)
class Connection:
    id: int
    src_ip: int
    response_total: int
    recv_window: int
    read_rate: int
    truth_label: str = LEGIT
    is_probe: bool = False
    zone_id: int = 0
    state: State = State.PENDING
    delivered: int = 0
    chunks: int = 0
    opened_at: int = 0
    last_progress_at: int = 0
    closed_at: int | None = None

    def next_read_at(self, rtt: int = 0) -> int:
        """Finish time of the next chunk, from the cumulative schedule."""
        c = min(self.recv_window, self.response_total - self.delivered)
        through = self.delivered + c
        return self.opened_at + _ceil_div(through * US_PER_S, self.read_rate) + (self.chunks + 1) * rtt


@dataclass(frozen=True)
class ServerConfig:
    max_clients: int
    timeout: int
    timeout_policy: Policy = Policy.IDLE
    rtt: int = 0

    def __post_init__(self):
        if self.max_clients < 0:
            raise BadParam("max_clients must be >= 0")
        if self.timeout <= 0:
            raise BadParam("timeout must be > 0")
        if self.rtt < 0:
            raise BadParam("rtt must be >= 0")


@dataclass
class Zone:
    id: int
    config: ServerConfig
    pool: dict[int, Connection] = field(default_factory=dict)

    @property
    def occupancy(self) -> int:
        return len(self.pool)

    def has_free_slot(self) -> bool:
        return len(self.pool) < self.config.max_clients


def try_admit(zone: Zone, conn: Connection, now: int) -> Admission:
    """Admit ``conn`` into ``zone`` if a slot is free.

    The caller schedules the first read tick at ``conn.next_read_at(rtt)``.
    """
    if conn.state is not State.PENDING:
        raise NotTransferring(f"conn {conn.id} is {conn.state.value}, expected Pending")
    if not zone.has_free_slot():
        conn.state = State.REJECTED_FULL
        conn.closed_at = now
        return Admission.REJECTED_FULL
    zone.pool[conn.id] = conn
    conn.zone_id = zone.id
    conn.state = State.TRANSFERRING
    conn.opened_at = conn.last_progress_at = now
    if conn.response_total == 0:
        conn.state = State.COMPLETE
    return Admission.ADMITTED


def deliver_chunk(conn: Connection, now: int) -> int:
    """Account one drained window; return the byte count.

    Moves the connection to Complete when the last byte is read.
    """
    if conn.state is not State.TRANSFERRING:
        raise NotTransferring(f"conn {conn.id} is {conn.state.value}")
    c = min(conn.recv_window, conn.response_total - conn.delivered)
    conn.delivered += c
    conn.chunks += 1
    conn.last_progress_at = now
    if conn.delivered == conn.response_total:
        conn.state = State.COMPLETE
    return c


def drain_time(response_total: int, recv_window: int, read_rate: int, rtt: int = 0) -> int:
    """Total transfer time in microseconds: size/rate plus one rtt per window."""
    if recv_window <= 0 or read_rate <= 0:
        raise BadParam("recv_window and read_rate must be positive")
    if response_total < 0:
        raise BadParam("response_total must be >= 0")
    return _ceil_div(response_total * US_PER_S, read_rate) + _ceil_div(response_total, recv_window) * rtt


def timeout_due(conn: Connection, now: int, config: ServerConfig) -> bool:
    if config.timeout_policy is Policy.IDLE:
        return now - conn.last_progress_at >= config.timeout
    return now - conn.opened_at >= config.timeout


def next_timeout_at(conn: Connection, config: ServerConfig) -> int:
    if config.timeout_policy is Policy.IDLE:
        return conn.last_progress_at + config.timeout
    return conn.opened_at + config.timeout


def close(zone: Zone, conn: Connection, reason: CloseReason, now: int) -> None:
    if zone.pool.get(conn.id) is not conn:
        raise NotInPool(f"conn {conn.id} not in zone {zone.id}")
    del zone.pool[conn.id]
    conn.state = _CLOSE_STATE[CloseReason(reason)]
    conn.closed_at = now
