import copy

import pytest
from hypothesis import given, settings, strategies as st

from slowread.defense import (
    AnalysisConfig, DefenseView, DropSet, GroupBy, ViewRow,
    analysis_cycle, apply_drops, classify_slow, route, throughput_of,
)
from slowread.errors import BadParam
from slowread.metrics import availability, confusion
from slowread.netmodel import ProviderMap, ip_from_text, ip_to_text, parse_cidr
from slowread.server import Connection, ServerConfig, State, Zone, try_admit
from slowread.sim import Simulation
from slowread.simkernel import parse_fields, seconds
from slowread.workload import (
    AttackWorkload, LegitWorkload, ProbeWorkload,
    build_attack_wave, build_legit_arrivals, build_probes, merge_arrivals,
)

CLOUD_X = parse_cidr("203.0.112.0/22")
CLOUD_Y = parse_cidr("198.18.0.0/15")
PMAP = ProviderMap([(CLOUD_X, "cloudX"), (CLOUD_Y, "cloudY")])
CFG = AnalysisConfig()
NOW = seconds(60)


def _zones(occ1, occ2, cap=500):
    zones = [Zone(1, ServerConfig(cap, seconds(20))), Zone(2, ServerConfig(cap, seconds(20)))]
    n = 0
    for z, occ in zip(zones, (occ1, occ2)):
        for _ in range(occ):
            try_admit(z, Connection(n, 1, 10**6, 8, 5), 0)
            n += 1
    return zones


def test_route():
    assert route(_zones(499, 0)) == 1
    assert route(_zones(500, 0)) == 2
    assert route(_zones(500, 500)) is None


def test_throughput_examples():
    row = ViewRow(1, 0, NOW - seconds(40), 200, NOW)
    assert throughput_of(row, NOW, CFG) == pytest.approx(5.0)
    assert throughput_of(ViewRow(1, 0, NOW - seconds(5), 200, NOW), NOW, CFG) is None
    assert throughput_of(ViewRow(1, 0, NOW - seconds(20), 0, NOW), NOW, CFG) == 0.0


def test_classify_examples():
    assert classify_slow(ViewRow(1, 0, NOW - seconds(40), 200, NOW), NOW, CFG)
    assert not classify_slow(ViewRow(1, 0, NOW - seconds(40), 400_000, NOW), NOW, CFG)
    assert not classify_slow(ViewRow(1, 0, NOW - seconds(5), 0, NOW), NOW, CFG)


def test_config_validation():
    for bad in ({"slow_threshold": 0}, {"group_threshold": 0}, {"analysis_period": 0}):
        with pytest.raises(BadParam):
            AnalysisConfig(**bad)


def _slow_rows(ips, start_id=0):
    return [ViewRow(start_id + i, ip, NOW - seconds(40), 200, NOW) for i, ip in enumerate(ips)]


def _hosts(block, n):
    return [block.first_usable() + i for i in range(n)]


def test_cycle_drops_whole_provider_group():
    view = DefenseView.from_rows(_slow_rows(_hosts(CLOUD_X, 600)))
    drops = analysis_cycle(view, PMAP, CFG, NOW)
    assert sorted(drops.ids) == list(range(600))
    assert drops.groups == {"provider:cloudX": 600}


def test_cycle_small_group_is_spared():
    view = DefenseView.from_rows(_slow_rows(_hosts(CLOUD_Y, 3)))
    assert len(analysis_cycle(view, PMAP, CFG, NOW)) == 0


def test_cycle_takes_slow_legit_in_same_provider():
    rows = _slow_rows(_hosts(CLOUD_X, 600))
    legit_ids = {rows[3].id, rows[400].id}
    view = DefenseView.from_rows(rows)
    drops = analysis_cycle(view, PMAP, CFG, NOW)
    assert legit_ids <= set(drops.ids) and len(drops) == 600


def test_cycle_groups_by_ip_catches_unknown_provider():
    ip = ip_from_text("192.0.2.77")
    view = DefenseView.from_rows(_slow_rows([ip] * 6))
    assert len(analysis_cycle(view, PMAP, CFG, NOW)) == 6
    prov_only = AnalysisConfig(group_by=GroupBy.PROVIDER)
    assert len(analysis_cycle(view, PMAP, prov_only, NOW)) == 0
    with_unknown = AnalysisConfig(group_by=GroupBy.PROVIDER, include_unknown_provider=True)
    assert len(analysis_cycle(view, PMAP, with_unknown, NOW)) == 6


def test_both_keys_report_once_under_provider():
    ip = CLOUD_X.first_usable()
    drops = analysis_cycle(DefenseView.from_rows(_slow_rows([ip] * 5)), PMAP, CFG, NOW)
    assert [k for _, k in drops.drops] == ["provider:cloudX"] * 5
    assert set(drops.groups) == {"provider:cloudX", "ip:203.0.112.1"}


def test_apply_drops():
    zones = _zones(500, 100)
    drops = DropSet(tuple((i, "provider:cloudX") for i in range(600)))
    assert apply_drops(zones, drops, NOW) == (600, 0)
    assert zones[0].occupancy == zones[1].occupancy == 0
    assert apply_drops(_zones(3, 0), DropSet(), NOW) == (0, 0)


def test_apply_drops_skips_finished():
    zones = _zones(2, 0)
    zones[0].pool[0].state = State.COMPLETE
    del zones[0].pool[0]
    drops = DropSet(((0, "ip:x"), (1, "ip:x")))
    assert apply_drops(zones, drops, NOW) == (1, 1)


def test_view_carries_no_labels():
    fields = set(DefenseView.__dataclass_fields__)
    assert "truth_label" not in fields and "is_probe" not in fields
    assert set(ViewRow.__dataclass_fields__) == {"id", "src_ip", "opened_at", "delivered",
                                                 "last_progress_at"}


def test_view_json_roundtrip():
    view = DefenseView.from_rows(_slow_rows(_hosts(CLOUD_X, 4)))
    back = DefenseView.from_json(view.to_json())
    assert list(back.rows()) == list(view.rows())


rows_st = st.lists(
    st.tuples(st.sampled_from([CLOUD_X.first_usable() + i for i in range(3)] +
                              [CLOUD_Y.first_usable(), ip_from_text("192.0.2.9")]),
              st.integers(0, seconds(60)), st.integers(0, 20_000)),
    max_size=60)


@settings(max_examples=80, deadline=None)
@given(rows_st, st.integers(1, 8), st.sampled_from(list(GroupBy)), st.booleans())
def test_cycle_is_pure_and_sound(raw, k, group_by, unknown):
    cfg = AnalysisConfig(group_threshold=k, group_by=group_by, include_unknown_provider=unknown)
    rows = [ViewRow(i, ip, NOW - age, delivered, NOW) for i, (ip, age, delivered) in enumerate(raw)]
    view = DefenseView.from_rows(rows)
    before = copy.deepcopy(view.to_json())
    first = analysis_cycle(view, PMAP, cfg, NOW)
    assert view.to_json() == before
    assert analysis_cycle(view, PMAP, cfg, NOW) == first
    by_id = {r.id: r for r in rows}
    assert len(set(first.ids)) == len(first.ids)
    for cid, key in first.drops:
        assert classify_slow(by_id[cid], NOW, cfg)
        assert first.groups[key] >= k
        members = [r for r in rows if classify_slow(r, NOW, cfg) and key in (
            f"ip:{ip_to_text(r.src_ip)}", f"provider:{PMAP.provider_of(r.src_ip)}")]
        assert len(members) == first.groups[key]


def _mitigated_run(horizon=seconds(120)):
    zones = [ServerConfig(50, seconds(20)), ServerConfig(50, seconds(20))]
    sim = Simulation(zones, PMAP, AnalysisConfig(), seed=11)
    rng = sim.rng
    arrivals = merge_arrivals(
        build_legit_arrivals(LegitWorkload(2, (50_000, 500_000), (1000, 20_000),
                                           parse_cidr("198.51.100.0/24"), 0.0, (16384, 65535)),
                             horizon, rng),
        build_attack_wave(AttackWorkload(80, CLOUD_X, launch_window=(seconds(5), seconds(10))),
                          PMAP, rng),
        build_probes(ProbeWorkload(seconds(5)), horizon))
    return sim.run(arrivals, horizon)


def test_overflow_goes_to_zone2_only_when_zone1_full():
    res = _mitigated_run()
    zone_of, occ1, overflow = {}, 0, 0
    for r in res.log:
        f = parse_fields(r.text)
        if r.kind == "ConnectAttempt" and f["result"] == "admitted":
            zone_of[f["conn"]] = f["zone"]
            if f["zone"] == "1":
                occ1 += 1
            else:
                overflow += 1
                assert occ1 == 50, r
        ended = []
        if r.kind in ("ReadTick", "TimeoutCheck") and "timeout" in f or r.kind == "TransferComplete":
            ended = [f["conn"]]
        elif r.kind == "AnalysisCycle" and f.get("armed") == "1" and f["ids"] != "-":
            ended = f["ids"].split(",")
        occ1 -= sum(1 for cid in ended if zone_of.pop(cid, None) == "1")
    assert overflow > 0


def test_recovery_after_burst():
    res = _mitigated_run()
    assert res.first_saturation is not None
    assert confusion(res.log) == {**confusion(res.log), "tp": 80, "fn": 0, "fp": 0}
    first_cycle = next(r.at for r in res.analysis if len(r.drops))
    late = [a for t, a in availability(res.log, seconds(5)) if t >= first_cycle + seconds(30)]
    assert late and all(a is None or a >= 0.95 for a in late)
    assert all(z.occupancy < 50 for z in res.zones)
