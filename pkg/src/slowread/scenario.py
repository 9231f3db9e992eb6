"""Scenario documents: strict JSON schema, validation, and the run driver.

Times in scenario files are seconds (``*_s`` keys); everything internal is
integer microseconds.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .defense import AnalysisConfig, GroupBy
from .errors import BadParam, MalformedCidr, MissingFile, ScenarioError, SlowReadError
from .metrics import build_report, export
from .netmodel import ProviderMap, ip_from_text, parse_cidr
from .server import Policy, ServerConfig
from .sim import SimResult, Simulation
from .simkernel import seconds
from .workload import (
    AttackWorkload, LegitWorkload, ProbeWorkload,
    build_attack_wave, build_legit_arrivals, build_probes, merge_arrivals,
)

SCHEMA_VERSION = 1

_range = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2}
_secs = {"type": "number", "minimum": 0}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "schema_version": {"const": SCHEMA_VERSION},
    "name": {"type": "string"},
    "description": {"type": "string"},
    "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    "horizon_s": {"type": "number", "exclusiveMinimum": 0},
    "metrics_window_s": {"type": "number", "exclusiveMinimum": 0},
    "provider_table": {"type": "string"},
    "zones": {"type": "array", "minItems": 1, "maxItems": 2, "items": _obj({
        "max_clients": {"type": "integer", "minimum": 0},
        "timeout_s": {"type": "number", "exclusiveMinimum": 0},
        "timeout_policy": {"enum": [p.value for p in Policy]},
        "rtt_s": _secs,
    }, ["max_clients", "timeout_s"])},
    "workloads": _obj({
        "legit": {"type": "array", "items": _obj({
            "arrival_rate": {"type": "number", "minimum": 0},
            "read_rate_range": _range,
            "response_size_range": _range,
            "src_block": {"type": "string"},
            "slow_fraction": {"type": "number", "minimum": 0, "maximum": 1},
            "window_range": _range,
            "slow_read_rate_range": _range,
            "slow_window_range": _range,
        }, ["arrival_rate", "read_rate_range", "response_size_range", "src_block"])},
        "attack": {"type": "array", "items": _obj({
            "count": {"type": "integer", "minimum": 0},
            "provider_block": {"type": "string"},
            "window_range": _range,
            "read_rate": {"type": "integer", "minimum": 1},
            "launch_window_s": {"type": "array", "items": _secs, "minItems": 2, "maxItems": 2},
            "response_size": {"type": "integer", "minimum": 0},
        }, ["count", "provider_block"])},
        "probe": {"type": "array", "items": _obj({
            "period_s": {"type": "number", "exclusiveMinimum": 0},
            "read_rate": {"type": "integer", "minimum": 1},
            "response_size": {"type": "integer", "minimum": 0},
            "recv_window": {"type": "integer", "minimum": 1},
            "src_ip": {"type": "string"},
        }, ["period_s"])},
    }),
    "analysis": _obj({
        "slow_threshold": {"type": "number", "exclusiveMinimum": 0},
        "min_observation_s": _secs,
        "group_by": {"enum": [g.value for g in GroupBy]},
        "group_threshold": {"type": "integer", "minimum": 1},
        "analysis_period_s": {"type": "number", "exclusiveMinimum": 0},
        "include_unknown_provider": {"type": "boolean"},
        "always_on": {"type": "boolean"},
        "analyze_zones": {"type": "array", "items": {"enum": [1, 2]}, "uniqueItems": True},
    }),
}, ["schema_version", "seed", "horizon_s", "zones", "workloads"])


@dataclass
class Scenario:
    seed: int
    horizon: int
    zones: list[ServerConfig]
    provider_map: ProviderMap
    legit: list[LegitWorkload] = field(default_factory=list)
    attack: list[AttackWorkload] = field(default_factory=list)
    probe: list[ProbeWorkload] = field(default_factory=list)
    analysis: AnalysisConfig | None = None
    metrics_window: int = seconds(5)
    name: str = "scenario"
    provider_table: str | None = None


def _path_of(err: jsonschema.ValidationError) -> str:
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def _field(path, fn, *args):
    try:
        return fn(*args)
    except (BadParam, MalformedCidr, ValueError) as exc:
        raise ScenarioError(path, str(exc)) from None


def parse_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingFile(str(path), "scenario file not found") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno}", exc.msg) from None
    return scenario_from_dict(doc, base_dir=path.parent)


def scenario_from_dict(doc: dict, base_dir=".") -> Scenario:
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(doc),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        if e.validator == "additionalProperties":
            extra = sorted(set(e.instance) - set(e.schema.get("properties", {})))
            where = _path_of(e)
            raise ScenarioError(f"{where}.{extra[0]}" if where != "<root>" else extra[0],
                                "unknown field")
        raise ScenarioError(_path_of(e), e.message)

    wl = doc["workloads"]
    if not any(wl.get(k) for k in ("legit", "attack", "probe")):
        raise ScenarioError("workloads", "at least one workload required")
    if "analysis" in doc and len(doc["zones"]) != 2:
        raise ScenarioError("zones", "analysis requires two zones")

    pmap, table = ProviderMap(), doc.get("provider_table")
    if table is not None:
        tpath = Path(base_dir) / table
        if not tpath.is_file():
            raise MissingFile("provider_table", f"{tpath} not found")
        pmap = _field("provider_table", ProviderMap.load, tpath)

    zones = [
        _field(f"zones.{i}", lambda z=z: ServerConfig(
            z["max_clients"], seconds(z["timeout_s"]),
            Policy(z.get("timeout_policy", "idle")), seconds(z.get("rtt_s", 0))))
        for i, z in enumerate(doc["zones"])
    ]

    def rng_pair(d, key, default):
        return tuple(d[key]) if key in d else default

    legit = []
    for i, w in enumerate(wl.get("legit", [])):
        p = f"workloads.legit.{i}"
        block = _field(f"{p}.src_block", parse_cidr, w["src_block"])
        legit.append(_field(p, lambda w=w, block=block: LegitWorkload(
            w["arrival_rate"], tuple(w["read_rate_range"]), tuple(w["response_size_range"]), block,
            w.get("slow_fraction", 0.05), rng_pair(w, "window_range", (1024, 65535)),
            rng_pair(w, "slow_read_rate_range", (5, 20)), rng_pair(w, "slow_window_range", (8, 16)))))
    attack = []
    for i, w in enumerate(wl.get("attack", [])):
        p = f"workloads.attack.{i}"
        block = _field(f"{p}.provider_block", parse_cidr, w["provider_block"])
        lw = w.get("launch_window_s", [0, 10])
        aw = _field(p, lambda w=w, block=block, lw=lw: AttackWorkload(
            w["count"], block, rng_pair(w, "window_range", (8, 16)), w.get("read_rate", 5),
            (seconds(lw[0]), seconds(lw[1])), w.get("response_size", 1_000_000)))
        if aw.count > block.usable:
            raise ScenarioError(f"{p}.count", f"{aw.count} exceeds {block.usable} usable hosts of {block}")
        attack.append(aw)
    probe = []
    for i, w in enumerate(wl.get("probe", [])):
        p = f"workloads.probe.{i}"
        src = _field(f"{p}.src_ip", ip_from_text, w.get("src_ip", "192.0.2.1"))
        probe.append(_field(p, lambda w=w, src=src: ProbeWorkload(
            seconds(w["period_s"]), w.get("read_rate", 1_000_000), w.get("response_size", 10_000),
            w.get("recv_window", 65535), src)))

    analysis = None
    if "analysis" in doc:
        a = doc["analysis"]
        d = AnalysisConfig()
        analysis = _field("analysis", lambda: AnalysisConfig(
            a.get("slow_threshold", d.slow_threshold),
            seconds(a["min_observation_s"]) if "min_observation_s" in a else d.min_observation,
            GroupBy(a.get("group_by", d.group_by.value)),
            a.get("group_threshold", d.group_threshold),
            seconds(a["analysis_period_s"]) if "analysis_period_s" in a else d.analysis_period,
            a.get("include_unknown_provider", d.include_unknown_provider),
            a.get("always_on", d.always_on),
            tuple(a.get("analyze_zones", d.analyze_zones))))

    return Scenario(
        seed=doc["seed"], horizon=seconds(doc["horizon_s"]), zones=zones, provider_map=pmap,
        legit=legit, attack=attack, probe=probe, analysis=analysis,
        metrics_window=seconds(doc.get("metrics_window_s", 5)), name=doc.get("name", "scenario"),
        provider_table=table)


def simulate(scenario: Scenario, seed: int | None = None) -> SimResult:
    """Build every workload from one seeded stream, then run."""
    seed = scenario.seed if seed is None else seed
    sim = Simulation(scenario.zones, scenario.provider_map, scenario.analysis, seed)
    rng = sim.rng
    streams = [build_legit_arrivals(w, scenario.horizon, rng) for w in scenario.legit]
    streams += [build_attack_wave(w, scenario.provider_map, rng) for w in scenario.attack]
    streams += [build_probes(w, scenario.horizon) for w in scenario.probe]
    return sim.run(merge_arrivals(*streams), scenario.horizon)


def run_scenario(scenario: Scenario, out_dir, seed: int | None = None) -> int:
    """Run and write ``events.log``, ``metrics.json``, ``availability.csv``,
    ``analysis.jsonl`` and ``fingerprint.txt`` into ``out_dir``."""
    seed = scenario.seed if seed is None else seed
    result = simulate(scenario, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = build_report(result.log, scenario.metrics_window, seed=seed, scenario=scenario.name,
                          first_saturation=result.first_saturation)
    result.log.write(out / "events.log")
    export(report, "json", out / "metrics.json")
    export(report, "csv", out / "availability.csv")
    with open(out / "analysis.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for rec in result.analysis:
            fh.write(json.dumps({
                "at_us": rec.at, "zone": rec.zone, "view": rec.view.to_json(),
                "drops": [[cid, key] for cid, key in rec.drops.drops],
                "groups": rec.drops.groups, "closed": rec.closed, "skipped": rec.skipped,
            }, sort_keys=True) + "\n")
    (out / "fingerprint.txt").write_text(f"sha256 {result.log.fingerprint()}\n", encoding="utf-8")
    return 0


__all__ = ["SCHEMA", "Scenario", "parse_scenario", "scenario_from_dict", "simulate",
           "run_scenario", "SlowReadError"]
