"""Acceptance criteria 1-8.

Each test prints a single ``criterion N: PASS|FAIL`` line; the lines are also
repeated in the pytest terminal summary.
"""

import itertools
import json

import numpy as np
import pytest

from aalsim.cli import main as cli_main
from aalsim.engine import EventTrace
from aalsim.errors import DuplicateSeq, MissingPackets
from aalsim.fronthaul import (ChannelSpec, ReorderStrategy, SlotAssembly, apply_channel,
                              packetize_bytes)
from aalsim.memory import HOST, LinkModel
from aalsim.mgmt import PartitionKind
from aalsim.profiles import (CodeSpec, PipelineConfig, ScramblerSpec, crc16, decode_blocks,
                             dl_pipeline, ul_pipeline)
from aalsim.sim import (OffloadPlan, check_slot_flow, fold_trace, run_downlink_slot,
                        run_scenario, run_uplink_slot)
from aalsim.transport import Transport
from tests import test_core, test_transport
from tests.conftest import scenario
from tests.test_profiles import longdiv_crc

RESULTS = {}


def _verdict(n, title, ok, detail=""):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
    RESULTS[n] = line
    print(line)
    assert ok, line


def test_criterion_1_transfer_counts():
    failures = []
    checks = 0
    for direction in ("uplink", "downlink"):
        cfg = scenario(direction=direction, num_slots=3)
        runner = run_uplink_slot if direction == "uplink" else run_downlink_slot
        cases = [("inline", (), 1)] + [("lookaside", tuple(range(k)), 2 * k) for k in (1, 2, 3, 5)]
        for kind, stages, closed_form in cases:
            report, trace = runner(cfg, plan=OffloadPlan(kind, stages))
            folded = fold_trace(EventTrace.from_lines(trace.to_text().splitlines()).records)
            for s, f in zip(report.slots, folded.slots):
                checks += 1
                if not (s.status == "ok" and s.host_device_transfers == f.host_device_transfers
                        == closed_form):
                    failures.append((direction, kind, len(stages), s.host_device_transfers,
                                     f.host_device_transfers))
    _verdict(1, "transfer-count oracle", not failures, f"{checks} slot checks, failures={failures}")


def _conformance_matrix():
    for direction, mode, strat, order, mod in itertools.product(
            ("uplink", "downlink"), ("inline", "lookaside"), ("streaming", "sequential"),
            ("identity", "reverse", "random"), ("qpsk", "qam16")):
        if direction == "downlink" and (strat, order) != ("streaming", "identity"):
            continue
        offload = ({"kind": "inline"} if mode == "inline"
                   else {"kind": "lookaside", "accelerated_stages": [1, 3]})
        yield scenario(direction=direction, num_slots=3, tb_size_bytes=200, mtu=300,
                       reorder_strategy=strat, offload_mode=offload,
                       channel={"order": order, "spacing_us": 1.0, "max_jitter_us": 2.0},
                       pipeline={"modulation": mod})


def test_criterion_2_flow_conformance():
    configs = list(_conformance_matrix())
    bad = []
    for i, cfg in enumerate(configs):
        report, trace = run_scenario(cfg, seed=i)
        for s in report.slots:
            ok, detail = check_slot_flow(trace.records, s.slot)
            if not ok or s.status != "ok":
                bad.append((i, s.slot, s.status, detail))
    _verdict(2, "flow conformance", len(configs) >= 20 and not bad,
             f"{len(configs)} configs, bad={bad[:3]}")


def _assemble(strategy, sched, n, seg):
    asm = SlotAssembly(0, n, seg, strategy)
    for d in sched:
        try:
            asm.submit(d.packet, d.time_us)
        except DuplicateSeq:
            pass
    try:
        return asm.finalize(), asm.ready_time_us
    except MissingPackets:
        return None, None


def test_criterion_3_reorder():
    rng = np.random.default_rng(33)
    S, Q = ReorderStrategy.STREAMING, ReorderStrategy.SEQUENTIAL
    problems = []
    perms = 0
    for n in range(1, 6):
        data = rng.bytes(5 * n - 2)
        pkts = packetize_bytes(data, 21)
        for perm in itertools.permutations(range(n)):
            sched = apply_channel(pkts, ChannelSpec(permutation=perm, spacing_us=1.0))
            (a, ta), (b, tb) = _assemble(S, sched, n, 5), _assemble(Q, sched, n, 5)
            perms += 1
            if not (a == b == data and ta <= tb and (n < 2 or ta < tb)):
                problems.append(("perm", n, perm))
    strict_cases = 0
    for trial in range(1000):
        seg = 16
        data = rng.bytes(63 * seg + int(rng.integers(1, seg + 1)))
        pkts = packetize_bytes(data, 16 + seg)
        spec = ChannelSpec.random(64, trial, drop_prob=0.005, dup_prob=0.05,
                                  max_delay_us=10.0, spacing_us=0.25)
        sched = apply_channel(pkts, spec)
        (a, ta), (b, tb) = _assemble(S, sched, 64, seg), _assemble(Q, sched, 64, seg)
        if a != b or (a is not None and a != data):
            problems.append(("bytes", trial))
        elif a is not None:
            if ta > tb:
                problems.append(("timing", trial))
            if len({d.time_us for d in sched}) >= 2:
                strict_cases += 1
                if not ta < tb:
                    problems.append(("strict", trial))
    _verdict(3, "reorder correctness", not problems,
             f"{perms} permutations, 1000 random trials, {strict_cases} strict; problems={problems[:3]}")


def test_criterion_4_loopback():
    bad = 0
    total = 0
    for mod, seed in itertools.product(("qpsk", "qam16"), (1, 93, 127)):
        cfg = PipelineConfig(CodeSpec.hamming74(), ScramblerSpec(seed=seed), mod)
        rng = np.random.default_rng(seed * 7 + len(mod))
        for _ in range(256):
            # 16-QAM needs (8L+16)*7/4 divisible by 4, i.e. an even byte count
            n = int(rng.integers(1, 65)) * 2
            tb = rng.integers(0, 256, n, dtype=np.uint8).tobytes()
            total += 1
            if ul_pipeline(dl_pipeline(tb, cfg), cfg) != (tb, True):
                bad += 1
    _verdict(4, "pipeline loopback", bad == 0, f"{total} TBs, {bad} mismatches")


def test_criterion_5_fec_and_crc():
    code = CodeSpec.hamming74()
    msgs = np.array(list(itertools.product((0, 1), repeat=4)), dtype=np.uint8)
    book = (msgs.astype(int) @ code.G.astype(int)) % 2
    words = np.array(list(itertools.product((0, 1), repeat=7)), dtype=np.uint8)
    dist = (words[:, None, :] != book[None, :, :]).sum(axis=2)
    ml = msgs[dist.argmin(axis=1)]
    within = dist.min(axis=1) <= 1
    decoded, conv = decode_blocks(words, code)
    fec_ok = bool(np.all(decoded[within] == ml[within]) and np.all(conv[within]))
    ref = longdiv_crc(b"123456789")
    got = crc16(np.unpackbits(np.frombuffer(b"123456789", dtype=np.uint8)))
    _verdict(5, "FEC vs ML oracle, CRC check value", fec_ok and got == ref == 0x31C3,
             f"{int(within.sum())} words within radius, crc=0x{got:04X} ref=0x{ref:04X}")


def test_criterion_6_transport():
    tr, transfer_ids, callbacks, errors = test_transport._replay_check(seed=6, steps=10_000)
    randomized = all(n == 1 for n in callbacks.values())
    targeted = []
    cases = [test_transport.test_sync_transfer_autofrees,       # DoubleFree
             test_transport.test_alloc_and_exhaustion,          # PoolExhausted
             test_transport.test_queue_full,                    # QueueFull
             test_transport.test_terminate_pool,                # PoolBusy
             test_transport.test_sync_completion_precedes_return,
             test_transport.test_async_return_precedes_completion_and_callback_once]
    for case in cases:
        try:
            case(Transport(link=LinkModel(2.0, 100.0)))
            targeted.append(True)
        except AssertionError:
            targeted.append(False)
    try:
        test_core.test_randomized_interleavings_exactly_once()
        exactly_once = True
    except AssertionError:
        exactly_once = False
    ok = randomized and all(targeted) and exactly_once
    _verdict(6, "transport semantics", ok,
             f"10000 steps, errors seen={sorted(errors)}, targeted={targeted}, "
             f"exactly_once={exactly_once}")


def test_criterion_7_partition_indistinguishability():
    hard = test_core._app_visible(PartitionKind.HARD)
    soft = test_core._app_visible(PartitionKind.SOFT)
    cfgs = [scenario(devices=[{"device_id": 0, "partition_kind": k}]) for k in ("Hard", "Soft")]
    sim_hard, sim_soft = (run_scenario(c, seed=1)[0].to_dict() for c in cfgs)
    _verdict(7, "partition indistinguishability", hard == soft and sim_hard == sim_soft,
             f"{len(hard[0])} app events, {len(hard[1])} aal records")


def test_criterion_8_determinism(tmp_path, capsys):
    configs = {
        "ul": dict(channel={"order": "random", "max_jitter_us": 4.0, "duplicate_prob": 0.1}),
        "dl": dict(direction="downlink", pipeline={"modulation": "qam16"}),
        "cmp": dict(direction="compare_modes",
                    offload_mode={"kind": "lookaside", "accelerated_stages": [0, 5]}),
    }
    verdicts = []
    for name, over in configs.items():
        path = tmp_path / f"{name}.json"
        data = {"schema_version": 1, "direction": "uplink", "slot_duration_us": 500.0,
                "tb_size_bytes": 96, "num_slots": 4}
        data.update(over)
        path.write_text(json.dumps(data))
        outs = []
        for run in ("a", "b"):
            out = tmp_path / f"{name}.{run}"
            cli_main(["run", "--config", str(path), "--seed", "77", "--out", str(out),
                      "--emit-trace"])
            outs.append(out)
        traces = sorted(tmp_path.glob(f"{name}.a*.trace"))
        for ta in traces:
            tb = tmp_path / ta.name.replace(f"{name}.a", f"{name}.b", 1)
            capsys.readouterr()
            rc = cli_main(["trace-diff", str(ta), str(tb)])
            verdicts.append(rc == 0 and capsys.readouterr().out.strip() == "identical")
        verdicts.append(outs[0].read_bytes() == outs[1].read_bytes())
    _verdict(8, "determinism", len(verdicts) >= 7 and all(verdicts), f"{len(verdicts)} comparisons")
