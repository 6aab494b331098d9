import numpy as np
import pytest

from aalsim.engine import Engine, EventTrace
from aalsim.errors import (DeviceBusy, IllegalState, IllegalTransition, InvalidArgument,
                           UnknownDevice, UnknownKey)
from aalsim.mgmt import (LEGAL_EDGES, DeviceState, HwaDescriptor, LifecycleOp, PartitionKind,
                         PerfCounters, Profile, Registry, fold_perf_counters)

BOTH = {Profile.FEC_LOOKASIDE, Profile.HIGH_PHY_INLINE}


def _reg(*descs):
    r = Registry(Engine())
    for d in descs:
        r.register(d)
    return r


def _dev(i, kind=PartitionKind.SOFT, lpus=2):
    return HwaDescriptor(i, f"vendor{i}", kind, lpus, BOTH)


def test_discover_empty_and_sorted():
    assert _reg().discover_devices() == []
    r = _reg(_dev(5, PartitionKind.SOFT), _dev(2, PartitionKind.HARD))
    listed = r.discover_devices()
    assert [d.device_id for d in listed] == [2, 5]
    assert [d.partition_kind for d in listed] == [PartitionKind.HARD, PartitionKind.SOFT]
    assert r.discover_devices() == listed


def test_descriptor_validation():
    with pytest.raises(InvalidArgument):
        HwaDescriptor(0, "v", "Soft", 0, BOTH)
    with pytest.raises(InvalidArgument):
        HwaDescriptor(0, "v", "Soft", 1, set())
    with pytest.raises(InvalidArgument):
        HwaDescriptor(0, "v", "Soft", 1, BOTH, firmware_version="1.2")
    with pytest.raises(ValueError):
        HwaDescriptor(0, "v", "Medium", 1, BOTH)


def test_lifecycle_path():
    r = _reg(_dev(0))
    assert r.state(0) is DeviceState.DISCOVERED
    assert r.lifecycle(0, LifecycleOp.INIT) is DeviceState.INITIALIZED
    assert r.lifecycle(0, LifecycleOp.START) is DeviceState.RUNNING
    with pytest.raises(IllegalTransition):
        r.lifecycle(0, LifecycleOp.UPGRADE, "2.0.0")
    assert r.lifecycle(0, LifecycleOp.STOP) is DeviceState.STOPPED
    assert r.lifecycle(0, LifecycleOp.UPGRADE, "2.1.0") is DeviceState.STOPPED
    assert r.descriptor(0).firmware_version == "2.1.0"
    assert r.trace.filter(kind="firmware", version="2.1.0")
    assert r.lifecycle(0, LifecycleOp.START) is DeviceState.RUNNING
    with pytest.raises(IllegalTransition):
        r.lifecycle(0, LifecycleOp.INIT)
    with pytest.raises(UnknownDevice):
        r.lifecycle(9, LifecycleOp.INIT)


def test_reset_after_fault_preserves_counters():
    r = _reg(_dev(0))
    r.lifecycle(0, "Init")
    r.record_job(0, True, 10, 20)
    r.fault(0, "thermal")
    assert r.state(0) is DeviceState.FAULTED
    assert r.lifecycle(0, LifecycleOp.RESET) is DeviceState.INITIALIZED
    assert r.get_perf_counters(0).jobs_completed == 1


def test_random_walk_stays_on_diagram():
    rng = np.random.default_rng(7)
    r = _reg(_dev(0))
    ops = list(LifecycleOp)
    for _ in range(3000):
        before = r.state(0)
        if rng.random() < 0.05:
            r.fault(0)
        else:
            op = ops[rng.integers(0, len(ops))]
            try:
                r.lifecycle(0, op, "1.0.1" if op is LifecycleOp.UPGRADE else None)
            except IllegalTransition:
                assert r.state(0) is before
                continue
        after = r.state(0)
        assert before is after and (before, after) in LEGAL_EDGES or (before, after) in LEGAL_EDGES


def test_configure_lpu_roundtrip_and_atomicity():
    r = _reg(_dev(0))
    lpu = r.lpus(0)[0]
    with pytest.raises(IllegalState):
        r.configure_lpu(lpu, {"max_queue_depth": 16})
    r.lifecycle(0, "Init")
    accepted = r.configure_lpu(lpu, {"max_queue_depth": 16})
    assert accepted["max_queue_depth"] == 16 == r.lpu_config(lpu)["max_queue_depth"]
    before = r.lpu_config(lpu)
    with pytest.raises(UnknownKey):
        r.configure_lpu(lpu, {"max_queue_depth": 4, "bogus": 1})
    assert r.lpu_config(lpu) == before
    with pytest.raises(InvalidArgument):
        r.configure_lpu(lpu, {"max_queue_depth": 0})
    assert r.lpu_config(lpu) == before
    r.lifecycle(0, "Start")
    with pytest.raises(DeviceBusy):
        r.configure_lpu(lpu, {"max_queue_depth": 8})
    r.lifecycle(0, "Stop")
    r.configure_lpu(lpu, {"completion_mode": "interrupt"})


def test_perf_counters_fold_matches_snapshots():
    r = _reg(_dev(0), _dev(1))
    assert r.get_perf_counters(0) == PerfCounters()
    rng = np.random.default_rng(3)
    snaps = []
    for i in range(200):
        dev = int(rng.integers(0, 2))
        roll = rng.random()
        if roll < 0.6:
            r.record_job(dev, True, int(rng.integers(0, 100)), int(rng.integers(0, 100)))
        elif roll < 0.8:
            r.record_job(dev, False, detail="boom")
        elif roll < 0.95:
            r.record_occupancy(dev, int(rng.integers(0, 20)))
        else:
            r.reset_counters(dev)
        snaps.append((len(r.trace) - 1, r.get_perf_counters(0), r.get_perf_counters(1)))
    text = EventTrace.from_lines(r.trace.to_text().splitlines()).records
    for seq, c0, c1 in snaps:
        assert fold_perf_counters(r.trace.records, 0, seq) == c0
        assert fold_perf_counters(text, 1, seq) == c1


def test_counters_after_n_jobs_and_reset():
    r = _reg(_dev(0))
    for _ in range(5):
        r.record_job(0, True, 1, 1)
    assert r.get_perf_counters(0).jobs_completed == 5
    r.reset_counters(0)
    assert r.get_perf_counters(0) == PerfCounters()
    r.record_job(0, True)
    assert r.get_perf_counters(0).jobs_completed == 1


def test_error_event_fanout_and_unsubscribe():
    r = _reg(_dev(0))
    a, b = [], []
    sa = r.subscribe_error_events(0, a.append)
    r.subscribe_error_events(0, b.append)
    r.fault(0, "x")
    r.record_job(0, False, detail="crc")
    assert [e.kind for e in a] == ["fault", "job_failed"] == [e.kind for e in b]
    assert a[0].trace_seq < a[1].trace_seq
    sa.unsubscribe()
    r.fault(0, "again")
    assert len(a) == 2 and len(b) == 3
