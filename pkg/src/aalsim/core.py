"""Three-tier offload hierarchy: LPU -> profile instance -> prioritized job queues.

An application obtains :class:`~aalsim.mgmt.AalLpu` handles from the
management registry, creates :class:`ProfileInstance` objects on them, opens
bounded :class:`ProfileQueue` objects with priorities, and enqueues jobs.
:meth:`ProfileInstance.scheduler_step` picks the head of the highest-priority
nonempty queue (lowest priority value, then lowest queue id), runs it to
completion, and hands the :class:`Completion` either to the registered
interrupt callback or to the poll list - never both.
"""

import itertools
import threading
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import (AalError, InvalidArgument, ProfileMismatch, QueueFull, RegistrationConflict,
                     UnsupportedProfile)
from .mgmt import DeviceState, Profile
from .profiles import decode_blocks, dl_pipeline, encode_blocks, ul_pipeline

ACTOR = "aal"


@dataclass(frozen=True)
class FecJob:
    """Encode ``k``-bit blocks or bit-flip decode ``n``-bit words, concatenated."""

    op: str
    bits: np.ndarray
    code: object

    profile = Profile.FEC_LOOKASIDE

    def __post_init__(self):
        if self.op not in ("encode", "decode"):
            raise InvalidArgument(f"FEC op must be 'encode' or 'decode', got {self.op!r}")

    @property
    def nbytes(self):
        return int(np.asarray(self.bits).size)

    def run(self):
        bits = np.asarray(self.bits, dtype=np.uint8).reshape(-1)
        if self.op == "encode":
            out = encode_blocks(bits.reshape(-1, self.code.k), self.code).reshape(-1)
            return out, {}
        msgs, conv = decode_blocks(bits.reshape(-1, self.code.n), self.code)
        return msgs.reshape(-1), {"converged": bool(np.all(conv))}


@dataclass(frozen=True)
class HighPhyJob:
    """Run the downlink chain on TB bytes or the uplink chain on IQ samples."""

    direction: str
    data: object
    cfg: object

    profile = Profile.HIGH_PHY_INLINE

    def __post_init__(self):
        if self.direction not in ("dl", "ul"):
            raise InvalidArgument(f"direction must be 'dl' or 'ul', got {self.direction!r}")

    @property
    def nbytes(self):
        if self.direction == "dl":
            return len(self.data)
        return int(np.asarray(self.data).size) * 16

    def run(self):
        if self.direction == "dl":
            return dl_pipeline(self.data, self.cfg), {}
        tb, ok = ul_pipeline(self.data, self.cfg)
        return tb, {"crc_ok": ok}


@dataclass
class Job:
    job_id: int
    queue_id: int
    payload: object


@dataclass(frozen=True)
class Completion:
    job_id: int
    queue_id: int
    outcome: str
    output: object = None
    reason: str = ""
    info: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.outcome == "Success"


def _output_nbytes(output):
    if output is None:
        return 0
    if isinstance(output, (bytes, bytearray)):
        return len(output)
    arr = np.asarray(output)
    return int(arr.size * (16 if np.iscomplexobj(arr) else 1))


class ProfileQueue:
    def __init__(self, queue_id, priority, depth):
        self.queue_id = queue_id
        self.priority = priority
        self.depth = depth
        self.pending = deque()

    def __len__(self):
        return len(self.pending)

    def __repr__(self):
        return f"ProfileQueue(id={self.queue_id}, prio={self.priority}, {len(self)}/{self.depth})"


class InterruptRegistration:
    def __init__(self, instance, callback):
        self._instance = instance
        self.callback = callback

    def unregister(self):
        self._instance._unregister(self)


class ProfileInstance:
    def __init__(self, instance_id, lpu, profile, registry, engine):
        self.instance_id = instance_id
        self.lpu = lpu
        self.profile = profile
        self.queues = []
        self._registry = registry
        self._engine = engine
        self._queue_ids = itertools.count(1)
        self._job_ids = itertools.count(1)
        self._completions = deque()
        self._interrupt = None
        self._lock = threading.RLock()
        self._dispatch_lock = threading.RLock()

    def __repr__(self):
        return f"ProfileInstance({self.instance_id}, lpu={self.lpu.lpu_id}, {self.profile.value})"

    def _record(self, kind, **fields):
        return self._engine.record(ACTOR, kind, inst=self.instance_id, **fields)

    def create_queue(self, priority, depth):
        if depth < 1:
            raise InvalidArgument(f"queue depth must be >= 1, got {depth}")
        with self._lock:
            q = ProfileQueue(next(self._queue_ids), priority, depth)
            self.queues.append(q)
            self._record("queue_create", queue=q.queue_id, prio=priority, depth=depth)
            return q

    def _own(self, queue):
        if queue not in self.queues:
            raise InvalidArgument(f"queue {queue.queue_id} does not belong to instance {self.instance_id}")

    def enqueue_job(self, queue, payload):
        """Append a job; returns the accepted :class:`Job`."""
        if getattr(payload, "profile", None) is not self.profile:
            raise ProfileMismatch(
                f"{type(payload).__name__} cannot run on a {self.profile.value} instance")
        with self._lock:
            self._own(queue)
            if len(queue.pending) >= queue.depth:
                raise QueueFull(f"queue {queue.queue_id} is full ({queue.depth})")
            job = Job(next(self._job_ids), queue.queue_id, payload)
            queue.pending.append(job)
            self._record("enqueue", queue=queue.queue_id, job=job.job_id)
            occupancy = len(queue.pending)
        self._registry.record_occupancy(self.lpu.device_id, occupancy)
        return job

    def _select(self):
        nonempty = [q for q in self.queues if q.pending]
        if not nonempty:
            return None, None
        best = min(nonempty, key=lambda q: (q.priority, q.queue_id))
        return best, nonempty

    def scheduler_step(self):
        """Select, run and complete one job. Returns the job or None if idle."""
        with self._dispatch_lock:
            with self._lock:
                queue, nonempty = self._select()
                if queue is None:
                    return None
                job = queue.pending.popleft()
                self._record("select", queue=queue.queue_id, job=job.job_id, prio=queue.priority,
                             waiting=",".join(f"{q.queue_id}:{q.priority}" for q in nonempty))
            completion = self._execute(job)
            with self._lock:
                self._record("complete", queue=job.queue_id, job=job.job_id,
                             outcome=completion.outcome)
                reg = self._interrupt
                if reg is None:
                    self._completions.append(completion)
            if reg is not None:
                self._record("deliver", job=job.job_id, via="interrupt")
                reg.callback(completion)
        return job

    def _execute(self, job):
        device_id = self.lpu.device_id
        if self._registry.state(device_id) is DeviceState.FAULTED:
            completion = Completion(job.job_id, job.queue_id, "Failure", reason="device faulted")
        else:
            try:
                output, info = job.payload.run()
                completion = Completion(job.job_id, job.queue_id, "Success", output, "", info)
            except AalError as exc:
                completion = Completion(job.job_id, job.queue_id, "Failure",
                                        reason=type(exc).__name__)
        self._registry.record_job(device_id, completion.ok, job.payload.nbytes,
                                  _output_nbytes(completion.output), completion.reason)
        return completion

    def drain(self, max_jobs=None):
        n = 0
        while max_jobs is None or n < max_jobs:
            if self.scheduler_step() is None:
                break
            n += 1
        return n

    def poll_completions(self, max_n=1):
        if max_n < 1:
            raise InvalidArgument("max_n must be >= 1")
        with self._lock:
            out = []
            while self._completions and len(out) < max_n:
                c = self._completions.popleft()
                self._record("deliver", job=c.job_id, via="poll")
                out.append(c)
            return out

    def register_interrupt(self, callback):
        with self._lock:
            if self._interrupt is not None:
                raise RegistrationConflict(f"instance {self.instance_id} already has an interrupt consumer")
            self._interrupt = InterruptRegistration(self, callback)
            self._record("interrupt_register")
            return self._interrupt

    def _unregister(self, reg):
        with self._lock:
            if self._interrupt is reg:
                self._interrupt = None
                self._record("interrupt_unregister")

    @property
    def pending_jobs(self):
        with self._lock:
            return sum(len(q.pending) for q in self.queues)


def create_profile_instance(registry, lpu, profile, engine=None):
    profile = Profile(profile)
    desc = registry.descriptor(lpu.device_id)
    if profile not in desc.supported_profiles:
        raise UnsupportedProfile(f"device {lpu.device_id} does not support {profile.value}")
    engine = engine if engine is not None else registry.engine
    inst = ProfileInstance(registry.next_instance_id(), lpu, profile, registry, engine)
    engine.record(ACTOR, "instance_create", inst=inst.instance_id, device=lpu.device_id,
                  lpu=lpu.lpu_id, profile=profile.value)
    return inst
