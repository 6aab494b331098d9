"""Management surface over a registry of mock HWA devices.

Covers discovery, lifecycle, LPU configuration, performance counters and
error-event subscription. Every state change is written to the trace under the
``mgmt`` actor so that counter snapshots can be re-derived by
:func:`fold_perf_counters`.
"""

import itertools
import threading
from dataclasses import dataclass, field, replace
from enum import Enum

from .engine import Engine
from .errors import (DeviceBusy, IllegalState, IllegalTransition, InvalidArgument, UnknownDevice,
                     UnknownKey)

ACTOR = "mgmt"


class PartitionKind(str, Enum):
    HARD = "Hard"
    SOFT = "Soft"


class Profile(str, Enum):
    FEC_LOOKASIDE = "FecLookaside"
    HIGH_PHY_INLINE = "HighPhyInline"


PROFILE_DESCRIPTIONS = {
    Profile.FEC_LOOKASIDE: ("lookaside", "channel encode/decode offload, host keeps the data path"),
    Profile.HIGH_PHY_INLINE: ("inline", "whole high-PHY chain on the accelerator, fronthaul I/O direct"),
}


class DeviceState(str, Enum):
    DISCOVERED = "Discovered"
    INITIALIZED = "Initialized"
    RUNNING = "Running"
    STOPPED = "Stopped"
    FAULTED = "Faulted"


class LifecycleOp(str, Enum):
    INIT = "Init"
    START = "Start"
    STOP = "Stop"
    RESET = "Reset"
    UPGRADE = "Upgrade"


_TRANSITIONS = {
    (DeviceState.DISCOVERED, LifecycleOp.INIT): DeviceState.INITIALIZED,
    (DeviceState.INITIALIZED, LifecycleOp.START): DeviceState.RUNNING,
    (DeviceState.STOPPED, LifecycleOp.START): DeviceState.RUNNING,
    (DeviceState.RUNNING, LifecycleOp.STOP): DeviceState.STOPPED,
    (DeviceState.FAULTED, LifecycleOp.RESET): DeviceState.INITIALIZED,
    (DeviceState.STOPPED, LifecycleOp.UPGRADE): DeviceState.STOPPED,
}

# every edge reachable through the public surface; Faulted is entered via fault()
LEGAL_EDGES = frozenset(
    {(src, dst) for (src, _), dst in _TRANSITIONS.items()}
    | {(s, DeviceState.FAULTED) for s in DeviceState}
)


@dataclass(frozen=True)
class HwaDescriptor:
    device_id: int
    vendor_tag: str
    partition_kind: PartitionKind
    num_lpus: int
    supported_profiles: frozenset
    firmware_version: str = "1.0.0"

    def __post_init__(self):
        object.__setattr__(self, "partition_kind", PartitionKind(self.partition_kind))
        object.__setattr__(self, "supported_profiles",
                           frozenset(Profile(p) for p in self.supported_profiles))
        if self.num_lpus < 1:
            raise InvalidArgument("num_lpus must be >= 1")
        if not self.supported_profiles:
            raise InvalidArgument("supported_profiles must be nonempty")
        _parse_semver(self.firmware_version)


def _parse_semver(text):
    parts = text.split(".")
    if len(parts) != 3 or not all(p.isdigit() for p in parts):
        raise InvalidArgument(f"firmware version {text!r} is not MAJOR.MINOR.PATCH")
    return tuple(int(p) for p in parts)


@dataclass
class PerfCounters:
    jobs_completed: int = 0
    jobs_failed: int = 0
    bytes_in: int = 0
    bytes_out: int = 0
    queue_occupancy_high_watermark: int = 0


@dataclass(frozen=True)
class AalLpu:
    """App-visible handle for a slice of accelerator resources."""

    lpu_id: int
    device_id: int
    partition_kind: PartitionKind
    capacity_units: int


@dataclass(frozen=True)
class ErrorEvent:
    device_id: int
    kind: str
    detail: str
    trace_seq: int


LPU_CONFIG_DEFAULTS = {
    "max_queue_depth": 64,
    "completion_mode": "poll",
    "priority_levels": 8,
    "max_payload_bytes": 65536,
}

_POSITIVE_INT_KEYS = {"max_queue_depth", "priority_levels", "max_payload_bytes", "capacity_units"}


def _check_config_value(key, value):
    if key in _POSITIVE_INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise InvalidArgument(f"{key} must be a positive integer, got {value!r}")
    elif key == "completion_mode" and value not in ("poll", "interrupt"):
        raise InvalidArgument(f"completion_mode must be 'poll' or 'interrupt', got {value!r}")


class Subscription:
    def __init__(self, device, sink):
        self._device = device
        self.sink = sink
        self.active = True
        self._lock = threading.Lock()

    def deliver(self, event):
        with self._lock:
            if self.active:
                self.sink(event)

    def unsubscribe(self):
        with self._lock:
            self.active = False
        self._device._drop_subscription(self)


@dataclass
class _Device:
    descriptor: HwaDescriptor
    state: DeviceState = DeviceState.DISCOVERED
    counters: PerfCounters = field(default_factory=PerfCounters)
    lpu_configs: dict = field(default_factory=dict)
    subscribers: list = field(default_factory=list)

    def _drop_subscription(self, sub):
        if sub in self.subscribers:
            self.subscribers.remove(sub)


class Registry:
    def __init__(self, engine=None):
        self.engine = engine if engine is not None else Engine()
        self._devices = {}
        self._lock = threading.RLock()
        self._instance_ids = itertools.count(1)

    def next_instance_id(self):
        with self._lock:
            return next(self._instance_ids)

    def _record(self, kind, **fields):
        return self.engine.record(ACTOR, kind, **fields)

    @property
    def trace(self):
        return self.engine.trace

    def register(self, descriptor):
        with self._lock:
            if descriptor.device_id in self._devices:
                raise InvalidArgument(f"device {descriptor.device_id} already registered")
            dev = _Device(descriptor)
            per_lpu = max(1, 100 // descriptor.num_lpus)
            for i in range(descriptor.num_lpus):
                dev.lpu_configs[i] = dict(LPU_CONFIG_DEFAULTS, capacity_units=per_lpu)
            self._devices[descriptor.device_id] = dev
            self._record("register", device=descriptor.device_id,
                         partition=descriptor.partition_kind.value)
            return descriptor

    def _dev(self, device_id):
        try:
            return self._devices[device_id]
        except KeyError:
            raise UnknownDevice(f"no device {device_id}") from None

    def has_device(self, device_id):
        return device_id in self._devices

    def discover_devices(self):
        with self._lock:
            return [self._devices[d].descriptor for d in sorted(self._devices)]

    def descriptor(self, device_id):
        return self._dev(device_id).descriptor

    def state(self, device_id):
        return self._dev(device_id).state

    # -- lifecycle ----------------------------------------------------------

    def lifecycle(self, device_id, op, version=None):
        op = LifecycleOp(op)
        with self._lock:
            dev = self._dev(device_id)
            new = _TRANSITIONS.get((dev.state, op))
            if new is None:
                raise IllegalTransition(f"device {device_id}: {op.value} not allowed in {dev.state.value}")
            if op is LifecycleOp.UPGRADE:
                if version is None:
                    raise InvalidArgument("Upgrade needs a target firmware version")
                _parse_semver(version)
                dev.descriptor = replace(dev.descriptor, firmware_version=version)
                self._record("firmware", device=device_id, version=version)
            self._record("lifecycle", device=device_id, op=op.value,
                         src=dev.state.value, dst=new.value)
            dev.state = new
            return new

    def fault(self, device_id, detail="fault"):
        with self._lock:
            dev = self._dev(device_id)
            rec = self._record("lifecycle", device=device_id, op="Fault",
                               src=dev.state.value, dst=DeviceState.FAULTED.value)
            dev.state = DeviceState.FAULTED
            event = ErrorEvent(device_id, "fault", detail, rec.seq)
            subs = list(dev.subscribers)
        for sub in subs:
            sub.deliver(event)
        return DeviceState.FAULTED

    # -- LPUs and configuration ---------------------------------------------

    def lpus(self, device_id):
        dev = self._dev(device_id)
        d = dev.descriptor
        return [AalLpu(i, d.device_id, d.partition_kind, dev.lpu_configs[i]["capacity_units"])
                for i in range(d.num_lpus)]

    def lpu_config(self, lpu):
        with self._lock:
            return dict(self._dev(lpu.device_id).lpu_configs[lpu.lpu_id])

    def configure_lpu(self, lpu, config):
        """Apply ``config`` atomically; any unknown key or bad value rejects all of it."""
        with self._lock:
            dev = self._dev(lpu.device_id)
            if dev.state is DeviceState.RUNNING:
                raise DeviceBusy(f"device {lpu.device_id} is running")
            if dev.state not in (DeviceState.INITIALIZED, DeviceState.STOPPED):
                raise IllegalState(f"device {lpu.device_id} is {dev.state.value}")
            current = dev.lpu_configs[lpu.lpu_id]
            unknown = sorted(set(config) - set(current))
            if unknown:
                raise UnknownKey(f"unknown LPU config keys: {unknown}")
            for key, value in config.items():
                _check_config_value(key, value)
            current.update(config)
            self._record("configure", device=lpu.device_id, lpu=lpu.lpu_id,
                         keys=",".join(sorted(config)) or "-")
            return dict(current)

    # -- performance counters -------------------------------------------------

    def get_perf_counters(self, device_id):
        with self._lock:
            return replace(self._dev(device_id).counters)

    def reset_counters(self, device_id):
        with self._lock:
            self._dev(device_id).counters = PerfCounters()
            self._record("counters_reset", device=device_id)

    def record_job(self, device_id, ok, bytes_in=0, bytes_out=0, detail=""):
        with self._lock:
            dev = self._dev(device_id)
            if ok:
                dev.counters.jobs_completed += 1
                dev.counters.bytes_in += bytes_in
                dev.counters.bytes_out += bytes_out
                self._record("job_done", device=device_id, bytes_in=bytes_in, bytes_out=bytes_out)
                return
            dev.counters.jobs_failed += 1
            rec = self._record("job_failed", device=device_id, detail=detail or "-")
            event = ErrorEvent(device_id, "job_failed", detail, rec.seq)
            subs = list(dev.subscribers)
        for sub in subs:
            sub.deliver(event)

    def record_occupancy(self, device_id, occupancy):
        with self._lock:
            c = self._dev(device_id).counters
            if occupancy > c.queue_occupancy_high_watermark:
                c.queue_occupancy_high_watermark = occupancy
                self._record("occupancy", device=device_id, n=occupancy)

    # -- error events -------------------------------------------------------

    def subscribe_error_events(self, device_id, sink):
        with self._lock:
            dev = self._dev(device_id)
            sub = Subscription(dev, sink)
            dev.subscribers.append(sub)
            return sub


def fold_perf_counters(records, device_id, upto_seq=None):
    """Rebuild a device's :class:`PerfCounters` from trace records.

    Works on live records and on records parsed back from a trace file.
    """
    c = PerfCounters()
    dev = str(device_id)
    for rec in records:
        if upto_seq is not None and rec.seq > upto_seq:
            break
        if rec.actor != ACTOR or str(rec.get("device")) != dev:
            continue
        if rec.kind == "job_done":
            c.jobs_completed += 1
            c.bytes_in += int(rec["bytes_in"])
            c.bytes_out += int(rec["bytes_out"])
        elif rec.kind == "job_failed":
            c.jobs_failed += 1
        elif rec.kind == "occupancy":
            c.queue_occupancy_high_watermark = max(c.queue_occupancy_high_watermark, int(rec["n"]))
        elif rec.kind == "counters_reset":
            c = PerfCounters()
    return c
