"""Event handlers binding the server model, workloads and defense to the engine.

Log text per kind (``key=value`` tokens):

* ConnectAttempt: ``conn src win rate size label probe result [zone occ]``
* ReadTick: ``conn delivered`` | ``conn timeout`` | ``conn stale``
* TransferComplete: ``conn complete``
* TimeoutCheck: ``conn timeout`` | ``conn recheck=<us>`` | ``conn stale``
* AnalysisCycle: ``zone armed [observed slow groups dropped skipped ids]``
* ScenarioEnd: ``occ<zone>=<n>`` per zone

At equal instants all pre-built arrivals and analysis ticks run before any
dynamically scheduled event, so a slot released at ``t`` is not visible to
an arrival at ``t``. A timeout and a read landing on the same instant
resolve as the timeout (the inclusive boundary).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .defense import AnalysisConfig, DefenseView, DropSet, analysis_cycle, apply_drops, route
from .errors import BadParam
from .netmodel import ProviderMap, ip_from_text, ip_to_text
from .server import (
    Admission, CloseReason, Connection, ServerConfig, State, Zone,
    close, deliver_chunk, next_timeout_at, timeout_due, try_admit,
)
from .simkernel import Engine, Event, EventLog, Kind, parse_fields
from .workload import ConnectSpec


@dataclass
class AnalysisRecord:
    at: int
    zone: int
    view: DefenseView
    drops: DropSet
    closed: int
    skipped: int


@dataclass
class SimResult:
    log: EventLog
    connections: dict[int, Connection]
    zones: list[Zone]
    analysis: list[AnalysisRecord] = field(default_factory=list)
    first_saturation: int | None = None
    horizon: int = 0


def arrival_text(arrival: ConnectSpec) -> str:
    return (f"conn={arrival.id} src={ip_to_text(arrival.src_ip)} win={arrival.recv_window} "
            f"rate={arrival.read_rate} size={arrival.response_total} label={arrival.truth_label} "
            f"probe={int(arrival.is_probe)}")


def arrival_from_fields(at: int, f: dict[str, str]) -> ConnectSpec:
    return ConnectSpec(at, ip_from_text(f["src"]), int(f["win"]), int(f["rate"]), int(f["size"]),
                       f["label"], f["probe"] == "1", int(f["conn"]))


class Simulation:
    """One scenario run: one or two zones, optional provider-grouped analysis."""

    def __init__(self, zones: Sequence[ServerConfig], provider_map: ProviderMap | None = None,
                 analysis: AnalysisConfig | None = None, seed: int = 0):
        if not 1 <= len(zones) <= 2:
            raise BadParam("one or two zones")
        if analysis is not None and len(zones) != 2:
            raise BadParam("analysis requires two zones")
        self.engine = Engine(seed)
        self.zones = [Zone(i + 1, cfg) for i, cfg in enumerate(zones)]
        self.pmap = provider_map or ProviderMap()
        self.analysis = analysis
        self.conns: dict[int, Connection] = {}
        self.records: list[AnalysisRecord] = []
        self.first_saturation: int | None = None
        self._armed = analysis is not None and analysis.always_on
        self._built = False
        e = self.engine
        e.on(Kind.CONNECT_ATTEMPT, self._on_connect)
        e.on(Kind.READ_TICK, self._on_read)
        e.on(Kind.TRANSFER_COMPLETE, self._on_complete)
        e.on(Kind.TIMEOUT_CHECK, self._on_timeout_check)
        e.on(Kind.ANALYSIS_CYCLE, self._on_analysis)
        e.on(Kind.SCENARIO_END, self._on_end)

    @property
    def rng(self):
        return self.engine.rng

    def run(self, arrivals: Sequence[ConnectSpec], horizon: int) -> SimResult:
        """Queue arrivals, analysis ticks and the end marker, then dispatch."""
        if self._built:
            raise RuntimeError("a Simulation runs once")
        self._built = True
        e = self.engine
        for arrival in arrivals:
            if arrival.id < 0:
                raise BadParam("arrivals need ids (see workload.merge_arrivals)")
            e.schedule(arrival.at, Kind.CONNECT_ATTEMPT, arrival)
        if self.analysis is not None:
            period = self.analysis.analysis_period
            for k in range(1, horizon // period + 1):
                for zid in self.analysis.analyze_zones:
                    if zid <= len(self.zones):
                        e.schedule(k * period, Kind.ANALYSIS_CYCLE, zid)
        e.schedule(horizon, Kind.SCENARIO_END)
        log = e.run(horizon)
        return SimResult(log, self.conns, self.zones, self.records, self.first_saturation, horizon)

    # handlers -------------------------------------------------------------

    def _on_connect(self, ev: Event) -> str:
        arrival: ConnectSpec = ev.payload
        now = ev.at
        conn = Connection(arrival.id, arrival.src_ip, arrival.response_total, arrival.recv_window,
                          arrival.read_rate, arrival.truth_label, arrival.is_probe)
        self.conns[conn.id] = conn
        if len(self.zones) == 2:
            zid = route(self.zones)
            zone = self.zones[zid - 1] if zid is not None else self.zones[1]
        else:
            zone = self.zones[0]
        if try_admit(zone, conn, now) is Admission.REJECTED_FULL:
            return arrival_text(arrival) + " result=rejected"
        z1 = self.zones[0]
        if zone is z1 and not z1.has_free_slot() and self.first_saturation is None:
            self.first_saturation = now
            self._armed = self.analysis is not None
        e = self.engine
        if conn.state is State.COMPLETE:
            e.schedule(now, Kind.TRANSFER_COMPLETE, conn.id)
        else:
            e.schedule(conn.next_read_at(zone.config.rtt), Kind.READ_TICK, conn.id)
            e.schedule(next_timeout_at(conn, zone.config), Kind.TIMEOUT_CHECK, conn.id)
        return arrival_text(arrival) + f" result=admitted zone={zone.id} occ={zone.occupancy}"

    def _on_read(self, ev: Event) -> str:
        conn = self.conns[ev.payload]
        if conn.state is not State.TRANSFERRING:
            return f"conn={conn.id} stale"
        zone = self.zones[conn.zone_id - 1]
        now = ev.at
        if timeout_due(conn, now, zone.config):
            close(zone, conn, CloseReason.TIMEOUT, now)
            return f"conn={conn.id} timeout"
        deliver_chunk(conn, now)
        if conn.state is State.COMPLETE:
            self.engine.schedule(now, Kind.TRANSFER_COMPLETE, conn.id)
        else:
            self.engine.schedule(conn.next_read_at(zone.config.rtt), Kind.READ_TICK, conn.id)
        return f"conn={conn.id} delivered={conn.delivered}"

    def _on_complete(self, ev: Event) -> str:
        conn = self.conns[ev.payload]
        close(self.zones[conn.zone_id - 1], conn, CloseReason.COMPLETE, ev.at)
        return f"conn={conn.id} complete"

    def _on_timeout_check(self, ev: Event) -> str:
        conn = self.conns[ev.payload]
        if conn.state is not State.TRANSFERRING:
            return f"conn={conn.id} stale"
        zone = self.zones[conn.zone_id - 1]
        if timeout_due(conn, ev.at, zone.config):
            close(zone, conn, CloseReason.TIMEOUT, ev.at)
            return f"conn={conn.id} timeout"
        at = next_timeout_at(conn, zone.config)
        self.engine.schedule(at, Kind.TIMEOUT_CHECK, conn.id)
        return f"conn={conn.id} recheck={at}"

    def _on_analysis(self, ev: Event) -> str:
        zid = ev.payload
        if not self._armed:
            return f"zone={zid} armed=0"
        zone = self.zones[zid - 1]
        view = DefenseView.of(list(zone.pool.values()))
        drops = analysis_cycle(view, self.pmap, self.analysis, ev.at)
        closed, skipped = apply_drops(self.zones, drops, ev.at)
        self.records.append(AnalysisRecord(ev.at, zid, view, drops, closed, skipped))
        groups = ",".join(f"{k}:{n}" for k, n in drops.groups.items()) or "-"
        ids = ",".join(str(i) for i in drops.ids) or "-"
        return (f"zone={zid} armed=1 observed={drops.observed} slow={drops.slow} "
                f"groups={groups} dropped={closed} skipped={skipped} ids={ids}")

    def _on_end(self, ev: Event) -> str:
        self.engine.stop()
        return " ".join(f"occ{z.id}={z.occupancy}" for z in self.zones)


def replay_arrivals(log: EventLog) -> list[ConnectSpec]:
    """Recover the arrival specs from a log's ConnectAttempt records."""
    return [arrival_from_fields(r.at, parse_fields(r.text))
            for r in log if r.kind == Kind.CONNECT_ATTEMPT.value]
