import math

import pytest

from aalsim.engine import Engine, EventTrace
from aalsim.errors import ConfigInvalid
from aalsim.fronthaul import segment_lengths
from aalsim.sim import (OffloadPlan, check_slot_flow, compare_modes, fold_trace, load_config,
                        run_downlink_slot, run_scenario, run_uplink_slot, slot_duration_for_scs,
                        validate_config)
from tests.conftest import scenario


def _paths(exc):
    return [p for p, _ in exc.value.diagnostics]


def test_engine_orders_by_time_then_insertion():
    eng = Engine()
    seen = []
    eng.at(5.0, seen.append, "late")
    eng.at(1.0, seen.append, "a")
    eng.at(1.0, seen.append, "b")
    eng.schedule(0.0, seen.append, "now")
    eng.run()
    assert seen == ["now", "a", "b", "late"]


def test_trace_text_roundtrip():
    eng = Engine()
    eng.record("x", "k", a=1, b=0.1, c="s", flag=True)
    text = eng.trace.to_text()
    back = EventTrace.from_lines(text.splitlines())
    assert back.to_text() == text
    assert float(back.records[0]["b"]) == 0.1


def test_uplink_nominal():
    report, trace = run_uplink_slot(scenario(num_slots=1))
    (s,) = report.slots
    assert s.status == "ok" and not s.deadline_missed
    assert s.host_device_transfers == 1
    assert check_slot_flow(trace.records, 0)[0]


def test_downlink_nominal_and_ru_recovers_tb():
    report, trace = run_downlink_slot(scenario(direction="downlink", num_slots=2))
    assert [s.host_device_transfers for s in report.slots] == [1, 1]
    assert all(s.status == "ok" for s in report.slots)
    decodes = trace.filter(actor="ru", kind="ru_decode")
    assert len(decodes) == 2 and all(r["crc_ok"] and r["match"] for r in decodes)
    for slot in (0, 1):
        ok, detail = check_slot_flow(trace.records, slot)
        assert ok, detail


def test_run_scenario_deterministic():
    cfg = scenario(channel={"order": "random", "max_jitter_us": 3.0})
    r1, t1 = run_scenario(cfg, seed=9)
    r2, t2 = run_scenario(cfg, seed=9)
    assert r1.to_dict() == r2.to_dict()
    assert t1.to_text() == t2.to_text()
    _, t3 = run_scenario(cfg, seed=10)
    assert t3.to_text() != t1.to_text()


def test_num_slots_ten():
    report, _ = run_scenario(scenario(num_slots=10))
    assert [s.slot for s in report.slots] == list(range(10))


def test_numerology():
    assert slot_duration_for_scs(30) == 500.0
    assert slot_duration_for_scs(15) == 1000.0
    scenario(scs_khz=30, slot_duration_us=500.0)
    with pytest.raises(ConfigInvalid):
        scenario(scs_khz=30, slot_duration_us=1000.0)


@pytest.mark.parametrize("bad,path", [
    ({"tb_size_bytes": 0}, "tb_size_bytes"),
    ({"slot_duration_us": -1}, "slot_duration_us"),
    ({"bogus": 1}, "bogus"),
    ({"mtu": 16}, "mtu"),
    ({"offload_mode": {"kind": "lookaside", "accelerated_stages": []}}, "offload_mode"),
    ({"offload_mode": {"kind": "lookaside", "accelerated_stages": [6]}}, "offload_mode"),
    ({"pipeline": {"modulation": "qam16"}, "tb_size_bytes": 63}, "tb_size_bytes"),
])
def test_config_rejections(bad, path):
    with pytest.raises(ConfigInvalid) as exc:
        scenario(**bad)
    assert any(p.startswith(path) for p in _paths(exc))


def test_missing_required_field_named():
    with pytest.raises(ConfigInvalid) as exc:
        validate_config({"schema_version": 1, "direction": "uplink", "tb_size_bytes": 8})
    assert "slot_duration_us" in _paths(exc)


def test_load_config_from_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{not json")
    with pytest.raises(ConfigInvalid):
        load_config(path)
    path.write_text('{"schema_version": 1, "direction": "downlink", "slot_duration_us": 500,'
                    ' "tb_size_bytes": 32}')
    assert load_config(path).direction == "downlink"


def test_generator_matrix_file(tmp_path):
    (tmp_path / "g.txt").write_text("1000110\n0100101\n0010011\n0001111\n")
    cfg = validate_config({"schema_version": 1, "direction": "uplink", "slot_duration_us": 500,
                           "tb_size_bytes": 16,
                           "pipeline": {"code": {"kind": "generator", "matrix_file": "g.txt"}}},
                          base_dir=tmp_path)
    report, _ = run_scenario(cfg, base_dir=tmp_path)
    assert report.slots[0].status == "ok"


def test_drop_isolated_to_one_slot():
    cfg = scenario(num_slots=3, channel={"drops": [{"slot": 1, "seq": 0}]})
    report, trace = run_scenario(cfg)
    assert [s.status for s in report.slots] == ["ok", "failed", "ok"]
    assert "MissingPackets" in report.slots[1].reason
    assert report.failed
    assert check_slot_flow(trace.records, 0)[0] and check_slot_flow(trace.records, 2)[0]


def test_streaming_vs_sequential():
    base = dict(num_slots=4, tb_size_bytes=600, mtu=400,
                channel={"order": "random", "spacing_us": 2.0, "max_jitter_us": 5.0})
    rs, _ = run_scenario(scenario(reorder_strategy="streaming", **base), seed=3)
    rq, _ = run_scenario(scenario(reorder_strategy="sequential", **base), seed=3)
    assert rs.output_sha256 == rq.output_sha256
    for a, b in zip(rs.slots, rq.slots):
        assert a.status == b.status == "ok"
        assert a.slot_latency_us <= b.slot_latency_us
    assert sum(a.slot_latency_us for a in rs.slots) < sum(b.slot_latency_us for b in rq.slots)


@pytest.mark.parametrize("k_stages", [(), (0,), (2, 4), (0, 1, 2), (0, 1, 2, 3, 4), tuple(range(6))])
@pytest.mark.parametrize("direction", ["uplink", "downlink"])
def test_lookaside_transfer_closed_form(direction, k_stages):
    cfg = scenario(direction=direction, num_slots=2)
    plan = OffloadPlan("lookaside", k_stages)
    runner = run_uplink_slot if direction == "uplink" else run_downlink_slot
    report, trace = runner(cfg, plan=plan)
    assert [s.host_device_transfers for s in report.slots] == [2 * len(k_stages)] * 2
    assert fold_trace(trace.records).to_dict() == report.to_dict()


def test_compare_modes_k3():
    cfg = scenario(direction="compare_modes", compare_direction="downlink",
                   offload_mode={"kind": "lookaside", "accelerated_stages": [1, 3, 5]})
    report, traces = run_scenario(cfg)
    assert report.inline.aggregates()["transfers_per_slot"] == 1
    assert report.lookaside.aggregates()["transfers_per_slot"] == 6
    assert report.transfer_ratio == 6.0
    assert report.outputs_identical
    assert set(traces) == {"inline", "lookaside"}


def test_compare_k0_pure_host():
    cfg = scenario(offload_mode={"kind": "lookaside", "accelerated_stages": [0]})
    report, _ = compare_modes(cfg, stages=())
    assert report.lookaside.aggregates()["host_device_transfers"] == 0
    assert report.outputs_identical


def test_compare_requires_lookaside_config():
    with pytest.raises(ConfigInvalid):
        scenario(direction="compare_modes")


@pytest.mark.parametrize("tb,mtu", [(64, 1516), (100, 1000), (250, 517), (40, 64)])
def test_ragged_last_packet_count(tb, mtu):
    report, trace = run_downlink_slot(scenario(direction="downlink", num_slots=1,
                                               tb_size_bytes=tb, mtu=mtu))
    iq_bytes = int(trace.filter(kind="iq_stored")[0]["bytes"])
    tx = trace.filter(kind="uplane_tx")
    assert len(tx) == math.ceil(iq_bytes / (mtu - 16)) == len(segment_lengths(iq_bytes, mtu))
    assert report.slots[0].status == "ok"


def test_tight_deadline_flags_miss():
    cfg = scenario(slot_duration_us=30.0, num_slots=2)
    report, trace = run_scenario(cfg)
    assert report.deadline_misses >= 1
    assert all(s.deadline_missed for s in report.slots if s.status == "ok")


def test_fold_matches_report_on_text_trace(tmp_path):
    cfg = scenario(num_slots=4, channel={"order": "reverse", "drops": [{"slot": 2, "seq": 1}]})
    report, trace = run_scenario(cfg, seed=4)
    trace.write(tmp_path / "t.trace")
    folded = fold_trace(EventTrace.read(tmp_path / "t.trace").records)
    assert folded.to_dict() == report.to_dict()


def test_hard_partition_device():
    cfg = scenario(devices=[{"device_id": 3, "vendor_tag": "x", "partition_kind": "Hard",
                             "num_lpus": 1}])
    report, _ = run_scenario(cfg)
    assert all(s.status == "ok" for s in report.slots)
