"""Scoring of a finished run, computed from the event log alone.

``confusion_from_states`` is a second, log-free path over the final
connection objects; the two must agree.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import kernels
from .errors import EmptySample
from .server import ATTACK, LEGIT, Connection, State
from .simkernel import EventLog, Kind, US_PER_S, parse_fields

TIMEOUT_FACTOR = Fraction(3, 2)  # "slightly greater" than the median lifetime

_K_CONNECT = Kind.CONNECT_ATTEMPT.value
_K_READ = Kind.READ_TICK.value
_K_DONE = Kind.TRANSFER_COMPLETE.value
_K_TIMEOUT = Kind.TIMEOUT_CHECK.value
_K_ANALYSIS = Kind.ANALYSIS_CYCLE.value
_K_END = Kind.SCENARIO_END.value


@dataclass
class ConnRecord:
    id: int
    at: int
    label: str
    probe: bool
    read_rate: int
    window: int
    size: int
    src: str
    admitted: bool
    zone: int = 0
    end_at: int | None = None
    end_state: str | None = None
    progress: list[int] | None = None


@dataclass
class ParsedLog:
    conns: dict[int, ConnRecord]
    horizon: int
    analysis: list[tuple[int, int, list[int]]]  # (at, zone, dropped ids)


def parse_log(log: EventLog, track_progress: bool = False) -> ParsedLog:
    conns: dict[int, ConnRecord] = {}
    analysis = []
    horizon = 0
    for r in log:
        kind = r.kind
        if kind == _K_READ:
            cid_s, _, rest = r.text.partition(" ")
            c = conns[int(cid_s[5:])]
            if rest.startswith("delivered="):
                if track_progress:
                    c.progress.append(r.at)
            elif rest == "timeout":
                c.end_at, c.end_state = r.at, State.DROPPED_TIMEOUT.value
            continue
        f = parse_fields(r.text)
        if kind == _K_CONNECT:
            cid = int(f["conn"])
            admitted = f["result"] == "admitted"
            conns[cid] = ConnRecord(
                cid, r.at, f["label"], f["probe"] == "1", int(f["rate"]), int(f["win"]),
                int(f["size"]), f["src"], admitted, int(f.get("zone", 0)),
                None if admitted else r.at, None if admitted else State.REJECTED_FULL.value,
                [r.at] if track_progress and admitted else None)
        elif kind == _K_DONE:
            c = conns[int(f["conn"])]
            c.end_at, c.end_state = r.at, State.COMPLETE.value
            if track_progress and (not c.progress or c.progress[-1] != r.at):
                c.progress.append(r.at)
        elif kind == _K_TIMEOUT:
            if "timeout" in f:
                c = conns[int(f["conn"])]
                c.end_at, c.end_state = r.at, State.DROPPED_TIMEOUT.value
        elif kind == _K_ANALYSIS:
            if f.get("armed") == "1":
                ids = [] if f["ids"] == "-" else [int(x) for x in f["ids"].split(",")]
                dropped = []
                for cid in ids:
                    c = conns[cid]
                    if c.end_at is None:
                        c.end_at, c.end_state = r.at, State.DROPPED_MITIGATION.value
                        dropped.append(cid)
                analysis.append((r.at, int(f["zone"]), dropped))
        elif kind == _K_END:
            horizon = r.at
    return ParsedLog(conns, horizon, analysis)


def _parsed(log) -> ParsedLog:
    return log if isinstance(log, ParsedLog) else parse_log(log)


def availability(log, window: int, horizon: int | None = None) -> list[tuple[int, float | None]]:
    """Per-window admitted/attempted ratio over legitimate attempts (probes
    included); ``None`` for windows without any attempt."""
    if window <= 0:
        raise ValueError("window must be > 0")
    p = _parsed(log)
    h = p.horizon if horizon is None else horizon
    n = h // window + 1
    legit = [c for c in p.conns.values() if c.label == LEGIT]
    at = np.array([c.at for c in legit], dtype=np.int64)
    ok = np.array([c.admitted for c in legit], dtype=bool)
    attempts, admits = kernels.window_tally(at, ok, window, n)
    return [(i * window, (int(a) / int(t)) if t else None)
            for i, (t, a) in enumerate(zip(attempts.tolist(), admits.tolist()))]


def confusion(log) -> dict[str, int]:
    p = _parsed(log)
    tp = fp = fn = tn = 0
    for c in p.conns.values():
        mitigated = c.end_state == State.DROPPED_MITIGATION.value
        if c.label == ATTACK:
            if mitigated:
                tp += 1
            elif c.admitted and c.end_state in (None, State.COMPLETE.value):
                fn += 1
        else:
            if mitigated:
                fp += 1
            else:
                tn += 1
    return {"tp": tp, "fp": fp, "fn": fn, "tn": tn}


def confusion_from_states(conns: dict[int, Connection]) -> dict[str, int]:
    tp = fp = fn = tn = 0
    for c in conns.values():
        if c.truth_label == ATTACK:
            if c.state is State.DROPPED_MITIGATION:
                tp += 1
            elif c.state in (State.TRANSFERRING, State.COMPLETE):
                fn += 1
        elif c.state is State.DROPPED_MITIGATION:
            fp += 1
        else:
            tn += 1
    return {"tp": tp, "fp": fp, "fn": fn, "tn": tn}


def lifetimes(log) -> dict[str, list[int]]:
    """Durations by terminal state; ``legit_complete`` is the recommender's
    input sample."""
    p = _parsed(log)
    out: dict[str, list[int]] = {s.value: [] for s in
                                 (State.COMPLETE, State.DROPPED_TIMEOUT, State.DROPPED_MITIGATION)}
    out["legit_complete"] = []
    for c in p.conns.values():
        if not c.admitted or c.end_at is None:
            continue
        out[c.end_state].append(c.end_at - c.at)
        if c.end_state == State.COMPLETE.value and c.label == LEGIT:
            out["legit_complete"].append(c.end_at - c.at)
    return out


def median_low(sample) -> int:
    s = sorted(sample)
    return s[(len(s) - 1) // 2]


def recommend_timeout(sample) -> int:
    """Median lifetime times 1.5, rounded up to whole seconds (microseconds out)."""
    sample = list(sample)
    if not sample:
        raise EmptySample("no completed connections to learn from")
    scaled = median_low(sample) * TIMEOUT_FACTOR
    return math.ceil(scaled / US_PER_S) * US_PER_S


def progress_gaps(log, label: str | None = ATTACK) -> dict[int, int]:
    """Largest spacing between consecutive progress instants per admitted
    connection (admission, reads, completion; close time for dropped ones)."""
    p = parse_log(log, track_progress=True) if not isinstance(log, ParsedLog) else log
    ids, offsets, times = [], [0], []
    for c in p.conns.values():
        if not c.admitted or (label is not None and c.label != label):
            continue
        pts = list(c.progress)
        if c.end_at is not None and pts[-1] != c.end_at:
            pts.append(c.end_at)
        ids.append(c.id)
        times.extend(pts)
        offsets.append(len(times))
    gaps = kernels.segment_max_gap(np.array(offsets), np.array(times, dtype=np.int64))
    return dict(zip(ids, gaps.tolist()))


def occupancy_trace(log, zone: int) -> list[tuple[int, int]]:
    """(time, pool size) after every change of ``zone``'s pool."""
    p = _parsed(log)
    deltas = []
    for c in p.conns.values():
        if c.admitted and c.zone == zone:
            deltas.append((c.at, c.id, 1))
            if c.end_at is not None:
                deltas.append((c.end_at, c.id, -1))
    # log order within an instant: admissions (pre-built) before releases
    deltas.sort(key=lambda d: (d[0], -d[2], d[1]))
    occ, out = 0, []
    for t, _, d in deltas:
        occ += d
        out.append((t, occ))
    return out


@dataclass
class MetricsReport:
    availability_series: list[tuple[int, float | None]]
    confusion: dict[str, int]
    rejected_full_legit: int
    attack_alive_at_end: int
    lifetimes: dict[str, list[int]]
    recommended_timeout: int | None
    window: int
    seed: int | None = None
    scenario: str | None = None
    first_saturation: int | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "window_us": self.window,
            "first_saturation_us": self.first_saturation,
            "availability_series": [
                {"window_start_us": t, "availability": None if a is None else round(a, 6)}
                for t, a in self.availability_series],
            "confusion": {k: self.confusion.get(k, 0) for k in ("tp", "fp", "fn", "tn")},
            "rejected_full_legit": self.rejected_full_legit,
            "attack_alive_at_end": self.attack_alive_at_end,
            "lifetimes_us": {k: sorted(v) for k, v in sorted(self.lifetimes.items())},
            "recommended_timeout_us": self.recommended_timeout,
            **({"extra": self.extra} if self.extra else {}),
        }


def build_report(log, window: int, seed=None, scenario=None, first_saturation=None) -> MetricsReport:
    p = _parsed(log)
    life = lifetimes(p)
    try:
        rec = recommend_timeout(life["legit_complete"])
    except EmptySample:
        rec = None
    rejected = sum(1 for c in p.conns.values() if c.label == LEGIT and not c.admitted)
    alive = sum(1 for c in p.conns.values() if c.label == ATTACK and c.admitted and c.end_at is None)
    return MetricsReport(availability(p, window), confusion(p), rejected, alive, life, rec,
                         window, seed, scenario, first_saturation)


def export(report: MetricsReport, fmt: str, path) -> None:
    """Write ``csv`` (availability series) or ``json`` (whole report)."""
    path = Path(path)
    if fmt == "json":
        text = json.dumps(report.to_json(), sort_keys=True, indent=2) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["window_start_us", "availability"])
        for t, a in report.availability_series:
            w.writerow([t, "" if a is None else f"{a:.6f}"])
        text = buf.getvalue()
    else:
        raise ValueError(f"unknown format {fmt!r}")
    path.write_text(text, encoding="utf-8")
