"""Slot-by-slot replay of the inline uplink and downlink flows, and lookaside placement.

Actors and the trace vocabulary:

``sim``   scenario / slot_start / slot_done bookkeeping (what the fold reads)
``mem``   xfer: every counted copy, tagged with its slot
``l2``    higher layer: config requests, output delivery
``l1c``   L1 control on the CPU: C-plane, host-side stages, pipeline triggers
``hwa``   accelerator: reorder placement, device-side stages, IQ storage
``nic``   DMA of received U-plane packets, scatter-gather transmit
``ru``    radio unit model: uplink waveform source, downlink sink

Milestone events carry ``step=<n>`` so the order checker can pick them out.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from ..core import HighPhyJob, create_profile_instance
from ..engine import Engine
from ..errors import AalError, DuplicateSeq, MissingPackets
from ..fronthaul import (C_PLANE, ChannelSpec, FronthaulPacket, ReorderStrategy, SlotAssembly,
                         apply_channel, packetize_bytes, packetize_slot, parse_packet,
                         release_descriptors, segment_size, serialize_packet)
from ..memory import HOST, Memory, MemoryDomain, TransferCounters, copy_across, transfer_time
from ..mgmt import LifecycleOp, Profile, Registry
from ..profiles import (DL_STAGES, NUM_STAGES, UL_STAGES, bytes_to_iq, dl_pipeline, iq_to_bytes,
                        ul_pipeline)
from ..profiles.pipeline import split_ul_output
from ..transport import Mode, OwnershipMode, ReceiveRequest, SendRequest, Transport
from .config import build_pipeline_config
from .metrics import CompareReport, MetricsReport, SlotMetrics

UL_FLOW = 1
DL_FLOW = 2


@dataclass(frozen=True)
class OffloadPlan:
    kind: str
    stages: tuple = ()

    def __post_init__(self):
        if self.kind not in ("inline", "lookaside"):
            raise ValueError(f"unknown offload kind {self.kind!r}")
        if self.kind == "inline" and self.stages:
            raise ValueError("inline takes no stage list")
        if any(not 0 <= i < NUM_STAGES for i in self.stages):
            raise ValueError(f"stage indices must lie in 0..{NUM_STAGES - 1}")
        object.__setattr__(self, "stages", tuple(sorted(set(self.stages))))

    @classmethod
    def from_config(cls, oc):
        return cls(oc.kind, tuple(oc.accelerated_stages))

    @property
    def inline(self):
        return self.kind == "inline"


def _digest(data):
    return hashlib.sha256(bytes(data)).hexdigest()


class _Slot:
    """Mutable per-slot state while a slot is in flight."""

    def __init__(self, index, t0, deadline, counters):
        self.index = index
        self.t0 = t0
        self.deadline = deadline
        self.counters = counters
        self.metrics = SlotMetrics(index)
        self.closed = False
        self.bufs = []
        self.assembly = None
        self.expected = None
        self.rx_held = []
        self.cplane_done_us = None
        self.job_id = None


class Simulation:
    """One scenario run: a single engine shared by every actor."""

    def __init__(self, cfg, seed=0, *, plan=None, direction=None, base_dir=None):
        self.cfg = cfg
        self.seed = int(seed)
        self.direction = direction or cfg.direction_run
        if self.direction not in ("uplink", "downlink"):
            raise ValueError(f"cannot simulate direction {self.direction!r}")
        self.plan = plan if plan is not None else OffloadPlan.from_config(cfg.offload_mode)
        self.pcfg = build_pipeline_config(cfg, base_dir)
        t = cfg.timing
        self.timing = t
        ss = np.random.SeedSequence(self.seed)
        tb_ss, chan_ss = ss.spawn(2)
        self.tb_rng = np.random.default_rng(tb_ss)
        self.chan_rng = np.random.default_rng(chan_ss)

        self.engine = Engine()
        self.registry = Registry(self.engine)
        for d in cfg.devices:
            self.registry.register(d.descriptor())
        dev = next(d.device_id for d in cfg.devices
                   if Profile.HIGH_PHY_INLINE in d.supported_profiles)
        self.registry.lifecycle(dev, LifecycleOp.INIT)
        self.registry.lifecycle(dev, LifecycleOp.START)
        self.dev = MemoryDomain.device(dev)
        self.link = cfg.link.model()
        self.memory = Memory()
        self.transport = Transport(self.engine, self.link, self.memory)

        self._sizes()
        self._slots = []
        self._completions = {}
        self._dl_inbox = []
        self._build_resources(dev)

    # -- setup ----------------------------------------------------------------

    def _sizes(self):
        probe = np.zeros(self.cfg.tb_size_bytes, dtype=np.uint8)
        sizes, data = [probe.nbytes], probe
        for st in DL_STAGES:
            data = st(data, self.pcfg)
            sizes.append(data.nbytes)
        self.iq_bytes = len(iq_to_bytes(data))
        for st in UL_STAGES:
            data = st(data, self.pcfg)
            sizes.append(data.nbytes)
        self.stage_bytes = max(sizes)
        self.seg = segment_size(self.cfg.mtu)
        self.npk = -(-self.iq_bytes // self.seg)

    def _build_resources(self, dev):
        cfg, tr = self.cfg, self.transport
        fh_domain = self.dev if self.plan.inline else HOST
        many = 4 * self.npk + 8
        self.nic_rx_pool = tr.create_buffer_pool(fh_domain, cfg.mtu, many)
        self.in_pool = tr.create_buffer_pool(fh_domain, max(self.iq_bytes, cfg.tb_size_bytes), 4)
        self.payload_pool = tr.create_buffer_pool(fh_domain, self.iq_bytes, 4)
        self.header_pool = tr.create_buffer_pool(HOST, 16, many)
        self.tb_pool = tr.create_buffer_pool(HOST, cfg.tb_size_bytes, 4)
        self.out_pool = tr.create_buffer_pool(HOST, cfg.tb_size_bytes + 4, 4)
        if self.plan.inline:
            lpu = self.registry.lpus(dev)[0]
            self.instance = create_profile_instance(self.registry, lpu, Profile.HIGH_PHY_INLINE)
            self.jobq = self.instance.create_queue(priority=0, depth=8)
            self.dl_q = tr.open_queue(depth=8, hwa_domain=self.dev, handler=self._dl_handler)
            self.ul_q = tr.open_queue(depth=8, hwa_domain=self.dev, rx_domain=HOST,
                                      rx_buffer_size=cfg.tb_size_bytes + 5, rx_pool_count=4)
        else:
            self.host_stage_pool = tr.create_buffer_pool(HOST, self.stage_bytes, 4)
            self.dev_stage_pool = tr.create_buffer_pool(self.dev, self.stage_bytes, 4)

    # -- helpers --------------------------------------------------------------

    def _rec(self, actor, kind, slot, **fields):
        return self.engine.record(actor, kind, slot=slot.index, **fields)

    def _at(self, slot, time_us, fn, *args):
        self.engine.at(time_us, self._guard, slot, fn, args)

    def _after(self, slot, delay_us, fn, *args):
        self.engine.schedule(delay_us, self._guard, slot, fn, args)

    def _guard(self, slot, fn, args):
        if slot.closed:
            return
        try:
            fn(slot, *args)
        except AalError as exc:
            self._finish(slot, "failed", reason=type(exc).__name__)

    def _alloc(self, slot, pool):
        buf = pool.allocate()
        slot.bufs.append(buf)
        return buf

    def _free(self, slot, buf):
        slot.bufs.remove(buf)
        buf.pool_obj.release(buf)

    def _finish(self, slot, status, output=None, reason=""):
        if slot.closed:
            return
        slot.closed = True
        for buf in slot.bufs:
            buf.pool_obj.release(buf)
        slot.bufs.clear()
        m = slot.metrics
        m.status = status
        m.reason = reason
        m.output_sha256 = _digest(output) if output is not None else "-"
        m.slot_latency_us = self.engine.now - slot.t0
        m.deadline_missed = status in ("ok", "crc_fail") and self.engine.now > slot.deadline
        snap = slot.counters.snapshot()
        m.host_device_transfers = snap["host_device_transfers"]
        m.host_device_bytes = snap["host_device_bytes"]
        self.engine.record("sim", "slot_done", slot=slot.index, status=status,
                           out=m.output_sha256, reason=reason or "-")

    def _counters(self, index):
        def listener(src, dst, nbytes):
            self.engine.record("mem", "xfer", slot=index, src=str(src), dst=str(dst),
                               bytes=nbytes)
        return TransferCounters(listener)

    # -- driver ---------------------------------------------------------------

    def run(self):
        cfg = self.cfg
        self.engine.record("sim", "scenario", direction=self.direction, mode=self.plan.kind,
                           stages=",".join(map(str, self.plan.stages)) or "-", seed=self.seed,
                           num_slots=cfg.num_slots, slot_us=float(cfg.slot_duration_us),
                           tb_bytes=cfg.tb_size_bytes, mtu=cfg.mtu,
                           reorder=cfg.reorder_strategy)
        start = self._ul_start if self.direction == "uplink" else self._dl_start
        for i in range(cfg.num_slots):
            t0 = i * cfg.slot_duration_us
            self.engine.at(t0, self._open_slot, i, t0, start)
        self.engine.run()
        for slot in self._slots:
            if not slot.closed:
                self._finish(slot, "failed", reason="stalled")
        return MetricsReport(self.direction, self.plan.kind, self.plan.stages, self.seed,
                             float(cfg.slot_duration_us), [s.metrics for s in self._slots])

    def _open_slot(self, index, t0, start):
        slot = _Slot(index, t0, t0 + self.cfg.slot_duration_us, self._counters(index))
        self._slots.append(slot)
        self.engine.record("sim", "slot_start", slot=index, deadline=slot.deadline)
        self._guard(slot, start, ())

    def _tb(self):
        return self.tb_rng.integers(0, 256, self.cfg.tb_size_bytes, dtype=np.uint8).tobytes()

    def _channel(self, slot, n):
        ch = self.cfg.channel
        if ch.order == "reverse":
            perm = tuple(range(n - 1, -1, -1))
        elif ch.order == "random":
            perm = tuple(int(i) for i in self.chan_rng.permutation(n))
        else:
            perm = None
        jitter = self.chan_rng.random(n) * ch.max_jitter_us
        dup = self.chan_rng.random(n) < ch.duplicate_prob
        drop = frozenset(d.seq for d in ch.drops if d.slot == slot.index)
        return ChannelSpec(perm, drop, frozenset(int(i) for i in np.flatnonzero(dup)) - drop,
                           tuple(float(x) for x in jitter), ch.spacing_us)

    # -- lookaside stage chain -----------------------------------------------

    def _la_run(self, slot, stages, data, done):
        self._la_stage(slot, stages, 0, data, done)

    def _la_stage(self, slot, stages, i, data, done):
        if i == len(stages):
            done(slot, data)
            return
        if i in self.plan.stages:
            hbuf = self._alloc(slot, self.host_stage_pool)
            hbuf.write(data.tobytes())
            dbuf = copy_across(hbuf, self.dev_stage_pool, slot.counters)
            slot.bufs.append(dbuf)
            self._free(slot, hbuf)
            self._after(slot, transfer_time(data.nbytes, self.link), self._la_device, stages, i,
                        dbuf, data.dtype, data.shape, done)
            return
        out = stages[i](data, self.pcfg)
        self._rec("l1c", "stage_exec", slot, stage=i, name=stages[i].name, where="host")
        self._after(slot, self.timing.host_stage_us[i], self._la_stage, stages, i + 1, out, done)

    def _la_device(self, slot, stages, i, dbuf, dtype, shape, done):
        arr = np.frombuffer(dbuf.read(), dtype=dtype).reshape(shape)
        self._free(slot, dbuf)
        out = stages[i](arr, self.pcfg)
        self._rec("hwa", "stage_exec", slot, stage=i, name=stages[i].name, where=str(self.dev))
        self._after(slot, self.timing.device_stage_us[i], self._la_return, stages, i, out, done)

    def _la_return(self, slot, stages, i, out, done):
        dbuf = self._alloc(slot, self.dev_stage_pool)
        dbuf.write(out.tobytes())
        hbuf = copy_across(dbuf, self.host_stage_pool, slot.counters)
        slot.bufs.append(hbuf)
        self._free(slot, dbuf)
        self._after(slot, transfer_time(out.nbytes, self.link), self._la_back, stages, i, hbuf,
                    out.dtype, out.shape, done)

    def _la_back(self, slot, stages, i, hbuf, dtype, shape, done):
        arr = np.frombuffer(hbuf.read(), dtype=dtype).reshape(shape).copy()
        self._free(slot, hbuf)
        self._la_stage(slot, stages, i + 1, arr, done)

    # -- inline job plumbing ---------------------------------------------------

    def _run_job(self, slot, job, done):
        accepted = self.instance.enqueue_job(self.jobq, job)
        slot.job_id = accepted.job_id
        self.instance.scheduler_step()
        exec_us = sum(self.timing.device_stage_us)
        self._after(slot, exec_us, self._job_done, done)

    def _job_done(self, slot, done):
        for c in self.instance.poll_completions(max_n=64):
            self._completions[c.job_id] = c
        c = self._completions.pop(slot.job_id)
        if not c.ok:
            self._finish(slot, "failed", reason=c.reason)
            return
        done(slot, c.output, c.info)

    # -- uplink ---------------------------------------------------------------

    def _ul_start(self, slot):
        self._rec("l2", "ul_config_request", slot, step=1, api="high_phy.configure")
        self._after(slot, self.timing.cplane_us, self._ul_cplane)

    def _ul_cplane(self, slot):
        cmsg = FronthaulPacket(C_PLANE, UL_FLOW, slot.index % 0x10000, 0, 0, 0,
                               self.npk.to_bytes(4, "big"))
        self._rec("l1c", "cplane_tx", slot, step=2, bytes=len(serialize_packet(cmsg)),
                  flow=UL_FLOW)
        # RU: the UE's transport block goes out as U-plane IQ
        tb = self._tb()
        slot.expected = tb
        iq = iq_to_bytes(dl_pipeline(tb, self.pcfg))
        packets = packetize_bytes(iq, self.cfg.mtu, flow_id=UL_FLOW, slot_id=slot.index % 0x10000)
        strategy = ReorderStrategy(self.cfg.reorder_strategy)
        slot.assembly = SlotAssembly(slot.index % 0x10000, len(packets), self.seg, strategy,
                                     overhead_us=self.timing.place_overhead_us,
                                     us_per_byte=self.timing.place_us_per_byte, flow_id=UL_FLOW)
        sched = apply_channel(packets, self._channel(slot, len(packets)),
                              self.engine.now + self.timing.ru_tx_offset_us)
        self._rec("ru", "uplane_burst", slot, packets=len(packets), delivered=len(sched))
        for d in sched:
            self._at(slot, d.time_us, self._ul_rx, serialize_packet(d.packet))
        self._at(slot, slot.deadline, self._ul_rx_deadline)

    def _ul_rx(self, slot, wire):
        if slot.assembly is None or slot.assembly.ready_time_us is not None:
            self._rec("nic", "late_packet", slot, bytes=len(wire))
            return
        buf = self._alloc(slot, self.nic_rx_pool)
        buf.write(wire)
        pkt = parse_packet(buf.read())
        self._rec("nic", "uplane_dma", slot, step=3, seq=pkt.seq_num, dst=str(buf.domain),
                  bytes=len(wire))
        try:
            act = slot.assembly.submit(pkt, self.engine.now)
        except DuplicateSeq:
            self._rec("hwa", "dup_drop", slot, seq=pkt.seq_num)
            self._free(slot, buf)
            return
        asm = slot.assembly
        if asm.strategy is ReorderStrategy.STREAMING:
            self._at(slot, act.done_us, self._ul_placed, act.seq_num, act.offset, act.length, buf)
        else:
            slot.rx_held.append(buf)
        if asm.complete:
            payload = asm.finalize()
            if asm.strategy is ReorderStrategy.SEQUENTIAL:
                for a in asm.placements():
                    self._at(slot, a.done_us, self._ul_placed, a.seq_num, a.offset, a.length, None)
            self._at(slot, asm.ready_time_us, self._ul_assembled, payload)

    def _ul_placed(self, slot, seq, offset, length, buf):
        self._rec("hwa", "reorder_place", slot, step=4, seq=seq, offset=offset, bytes=length)
        if buf is not None:
            self._free(slot, buf)

    def _ul_rx_deadline(self, slot):
        asm = slot.assembly
        if asm.ready_time_us is not None:
            return
        try:
            asm.finalize()
        except MissingPackets as exc:
            self._rec("hwa", "slot_incomplete", slot, missing=",".join(map(str, exc.missing)))
            self._finish(slot, "failed", reason="MissingPackets")

    def _ul_assembled(self, slot, payload):
        for buf in slot.rx_held:
            self._free(slot, buf)
        slot.rx_held.clear()
        inbuf = self._alloc(slot, self.in_pool)
        inbuf.write(payload)
        iq = bytes_to_iq(inbuf.read())
        self._free(slot, inbuf)
        self._rec("hwa" if self.plan.inline else "l1c", "ul_pipeline_start", slot, step=5,
                  samples=len(iq))
        if self.plan.inline:
            self._run_job(slot, HighPhyJob("ul", iq, self.pcfg), self._ul_inline_done)
        else:
            self._la_run(slot, UL_STAGES, iq, self._ul_lookaside_done)

    def _ul_inline_done(self, slot, tb, info):
        ok = info["crc_ok"]
        self._rec("hwa", "ul_pipeline_done", slot, step=5, crc_ok=ok)
        # output buffer tagged with its slot so out-of-order receives are harmless
        self.transport.post_rx(self.ul_q, slot.index.to_bytes(4, "big") + bytes([ok]) + tb)
        self.transport.receive_buffers(ReceiveRequest(
            self.ul_q, None, Mode.ASYNC, callback=self._ul_received, counters=slot.counters))

    def _ul_received(self, status):
        if not status.ok:
            return
        buf = status.returned_buffers[0]
        raw = buf.read()
        self.transport.free_buffer(buf)
        slot = self._slots[int.from_bytes(raw[:4], "big")]
        self._guard(slot, self._ul_deliver, (raw[5:], bool(raw[4])))

    def _ul_lookaside_done(self, slot, out):
        tb, ok = split_ul_output(out)
        self._rec("l1c", "ul_pipeline_done", slot, step=5, crc_ok=ok)
        hbuf = self._alloc(slot, self.out_pool)
        hbuf.write(tb)
        self._ul_deliver(slot, hbuf.read(), ok)

    def _ul_deliver(self, slot, tb, crc_ok):
        match = tb == slot.expected
        self._rec("l2", "ul_output_delivered", slot, step=6, bytes=len(tb), match=match)
        self._finish(slot, "ok" if crc_ok and match else "crc_fail", output=tb)

    # -- downlink -------------------------------------------------------------

    def _dl_handler(self, qid, payloads):
        self._dl_inbox.append(payloads[0])

    def _dl_start(self, slot):
        self._rec("l2", "dl_config_request", slot, step=1, api="high_phy.configure")
        tb = self._tb()
        slot.expected = tb
        if self.plan.inline:
            buf = self.transport.alloc_buffer(self.tb_pool)
            buf.write(tb)
            self.transport.send_buffers(SendRequest(
                self.dl_q, [buf], OwnershipMode.TRANSFER, Mode.ASYNC,
                callback=lambda st, s=slot: self._guard(s, self._dl_tb_sent, (st,)),
                counters=slot.counters))
        else:
            self._dl_trigger(slot, tb)

    def _dl_tb_sent(self, slot, status):
        if not status.ok:
            for b in status.returned_buffers:
                self.transport.free_buffer(b)
            self._finish(slot, "failed", reason=status.reason)
            return
        tb = self._dl_inbox.pop(0)
        self._rec("hwa", "dl_tb_received", slot, step=2, bytes=len(tb), src="host",
                  dst=str(self.dev))
        inbuf = self._alloc(slot, self.in_pool)
        inbuf.write(tb)
        self._dl_trigger(slot, inbuf.read())
        self._free(slot, inbuf)

    def _dl_trigger(self, slot, tb):
        self._rec("l1c", "dl_pipeline_trigger", slot, step=2,
                  where=str(self.dev) if self.plan.inline else "host")
        slot.cplane_done_us = self.engine.now + self.timing.cplane_us
        self._at(slot, slot.cplane_done_us, self._dl_cplane)
        if self.plan.inline:
            self._run_job(slot, HighPhyJob("dl", tb, self.pcfg), self._dl_inline_done)
        else:
            self._la_run(slot, DL_STAGES, np.frombuffer(tb, dtype=np.uint8),
                         self._dl_lookaside_done)

    def _dl_cplane(self, slot):
        cmsg = FronthaulPacket(C_PLANE, DL_FLOW, slot.index % 0x10000, 0, 0, 0,
                               self.npk.to_bytes(4, "big"))
        self._rec("l1c", "cplane_tx", slot, step=3, bytes=len(serialize_packet(cmsg)),
                  flow=DL_FLOW)

    def _dl_inline_done(self, slot, iq, info):
        self._dl_iq_ready(slot, iq)

    def _dl_lookaside_done(self, slot, iq):
        self._dl_iq_ready(slot, iq)

    def _dl_iq_ready(self, slot, iq):
        # IQ is stored only once the C-plane for the slot has gone out
        self._at(slot, max(self.engine.now, slot.cplane_done_us), self._dl_store, iq)

    def _dl_store(self, slot, iq):
        pbuf = self._alloc(slot, self.payload_pool)
        pbuf.write(iq_to_bytes(iq))
        self._rec("hwa" if self.plan.inline else "l1c", "iq_stored", slot, step=4,
                  domain=str(pbuf.domain), bytes=pbuf.length)
        descs = packetize_slot(pbuf, self.cfg.mtu, self.header_pool, flow_id=DL_FLOW,
                               slot_id=slot.index % 0x10000)
        slot.assembly = SlotAssembly(slot.index % 0x10000, len(descs), self.seg,
                                     ReorderStrategy.STREAMING, flow_id=DL_FLOW)
        step = self.timing.nic_tx_us_per_packet
        for k, d in enumerate(descs):
            self._after(slot, (k + 1) * step, self._dl_emit, d, k == len(descs) - 1, descs, pbuf)

    def _dl_emit(self, slot, desc, last, descs, pbuf):
        wire = desc.gather()
        self._rec("nic", "uplane_tx", slot, step=5, seq=desc.seq_num,
                  hdr=str(desc.header.domain), payload=str(desc.payload.domain), bytes=len(wire))
        slot.assembly.submit(parse_packet(wire), self.engine.now)
        if not last:
            return
        release_descriptors(descs)
        iq_wire = slot.assembly.finalize()
        self._free(slot, pbuf)
        tb, ok = ul_pipeline(bytes_to_iq(iq_wire), self.pcfg)
        match = ok and tb == slot.expected
        self._rec("ru", "ru_decode", slot, crc_ok=ok, match=match)
        self._finish(slot, "ok" if match else "crc_fail", output=iq_wire)


# -- public entry points -----------------------------------------------------

def run_uplink_slot(cfg, seed=0, *, plan=None, base_dir=None):
    sim = Simulation(cfg, seed, plan=plan, direction="uplink", base_dir=base_dir)
    return sim.run(), sim.engine.trace


def run_downlink_slot(cfg, seed=0, *, plan=None, base_dir=None):
    sim = Simulation(cfg, seed, plan=plan, direction="downlink", base_dir=base_dir)
    return sim.run(), sim.engine.trace


def compare_modes(cfg, seed=0, *, stages=None, base_dir=None):
    """Run the same slots inline and lookaside; returns (CompareReport, traces)."""
    if stages is None:
        stages = tuple(cfg.offload_mode.accelerated_stages)
    direction = cfg.direction_run
    runs = {}
    for name, plan in (("inline", OffloadPlan("inline")),
                       ("lookaside", OffloadPlan("lookaside", tuple(stages)))):
        sim = Simulation(cfg, seed, plan=plan, direction=direction, base_dir=base_dir)
        runs[name] = (sim.run(), sim.engine.trace)
    report = CompareReport(direction, runs["inline"][0], runs["lookaside"][0])
    return report, {k: v[1] for k, v in runs.items()}


def run_scenario(cfg, seed=0, *, base_dir=None):
    """Dispatch on ``cfg.direction``.

    Returns ``(MetricsReport, EventTrace)`` for uplink/downlink and
    ``(CompareReport, {"inline": trace, "lookaside": trace})`` for compare_modes.
    """
    if cfg.direction == "compare_modes":
        return compare_modes(cfg, seed, base_dir=base_dir)
    sim = Simulation(cfg, seed, base_dir=base_dir)
    return sim.run(), sim.engine.trace
