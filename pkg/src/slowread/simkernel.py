"""Deterministic discrete-event engine.

Virtual time is integer microseconds. Events are ordered by ``(at, seq)``
where ``seq`` is assigned at scheduling time, so simultaneous events run in
FIFO order. All randomness comes from :class:`SplitMix64`, a 64-bit
generator whose full algorithm is five lines of integer arithmetic and
therefore yields identical draws on every platform.
"""
from __future__ import annotations

import hashlib
import heapq
import math
from enum import Enum
from typing import Any, Callable, Iterable, NamedTuple

from .errors import BadRange, PastEvent

US_PER_S = 1_000_000
_MASK64 = (1 << 64) - 1


def seconds(s: float) -> int:
    """Convert seconds to integer microseconds, rounded to the nearest."""
    return int(round(s * US_PER_S))


def to_seconds(us: int) -> float:
    return us / US_PER_S


class Kind(str, Enum):
    CONNECT_ATTEMPT = "ConnectAttempt"
    READ_TICK = "ReadTick"
    TIMEOUT_CHECK = "TimeoutCheck"
    ANALYSIS_CYCLE = "AnalysisCycle"
    TRANSFER_COMPLETE = "TransferComplete"
    SCENARIO_END = "ScenarioEnd"

    def __str__(self):
        return self.value


class Event(NamedTuple):
    at: int
    seq: int
    kind: Kind
    payload: Any = None


class LogRecord(NamedTuple):
    at: int
    seq: int
    kind: str
    text: str

    def line(self) -> str:
        return f"{self.at}\t{self.seq}\t{self.kind}\t{self.text}"


class SplitMix64:
    """SplitMix64 (Steele, Lea, Flood 2014; reference code by S. Vigna).

    ``next_u64`` is bit-exact with the public-domain C reference.
    """

    __slots__ = ("seed", "state")

    GAMMA = 0x9E3779B97F4A7C15

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self.state = self.seed

    def next_u64(self) -> int:
        self.state = (self.state + self.GAMMA) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def exponential(self, rate: float) -> float:
        return -math.log1p(-self.random()) / rate


def draw_uniform_int(rng: SplitMix64, lo: int, hi: int) -> int:
    """Unbiased integer in ``[lo, hi]`` by rejection sampling on 64-bit draws."""
    if lo > hi:
        raise BadRange(f"empty range [{lo}, {hi}]")
    span = hi - lo + 1
    if span > 1 << 64:
        raise BadRange("range wider than 2**64")
    limit = ((1 << 64) // span) * span
    while True:
        x = rng.next_u64()
        if x < limit:
            return lo + x % span


class EventLog:
    """Ordered record of dispatched events.

    Each record's ``text`` is the handler's account of what happened
    (payload plus resulting transition) as space-separated ``key=value``
    tokens.
    """

    def __init__(self, records: Iterable[LogRecord] = ()):
        self.records: list[LogRecord] = list(records)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __eq__(self, other):
        return isinstance(other, EventLog) and self.records == other.records

    def append(self, record: LogRecord) -> None:
        self.records.append(record)

    def lines(self):
        for r in self.records:
            yield r.line()

    def serialize(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for line in self.lines():
            h.update(line.encode())
            h.update(b"\n")
        return h.hexdigest()

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in self.lines():
                fh.write(line)
                fh.write("\n")

    @classmethod
    def parse(cls, text: str) -> "EventLog":
        records = []
        for line in text.splitlines():
            if not line:
                continue
            at, seq, kind, body = line.split("\t", 3)
            records.append(LogRecord(int(at), int(seq), kind, body))
        return cls(records)

    @classmethod
    def read(cls, path) -> "EventLog":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read())


def parse_fields(text: str) -> dict[str, str]:
    """``key=value`` tokens to a dict; bare flags map to ``""``."""
    out = {}
    for tok in text.split():
        key, _, value = tok.partition("=")
        out[key] = value
    return out


Handler = Callable[[Event], str]


class Engine:
    """Single-threaded event loop with a seeded RNG.

    Handlers are registered per :class:`Kind`; each returns the text logged
    for the event. Unhandled kinds are logged with ``str(payload)``.
    """

    def __init__(self, seed: int = 0):
        self.now = 0
        self.rng = SplitMix64(seed)
        self.log = EventLog()
        self._queue: list[Event] = []
        self._seq = 0
        self._handlers: dict[Kind, Handler] = {}
        self._stopped = False

    def on(self, kind: Kind, handler: Handler) -> None:
        self._handlers[kind] = handler

    def schedule(self, at: int, kind: Kind, payload=None) -> Event:
        if at < self.now:
            raise PastEvent(f"event at {at} us is before now={self.now} us")
        ev = Event(int(at), self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def pending(self) -> int:
        return len(self._queue)

    def stop(self) -> None:
        """Stop after the current event; later events stay queued."""
        self._stopped = True

    def run(self, until: int) -> EventLog:
        queue = self._queue
        handlers = self._handlers
        append = self.log.records.append
        pop = heapq.heappop
        self._stopped = False
        while queue and queue[0].at <= until and not self._stopped:
            ev = pop(queue)
            self.now = ev.at
            handler = handlers.get(ev.kind)
            text = handler(ev) if handler is not None else str(ev.payload)
            append(LogRecord(ev.at, ev.seq, ev.kind.value, text))
        return self.log
