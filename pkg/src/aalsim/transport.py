"""Generic buffer-management transport between an AAL application and an HWA.

The application creates pools, allocates buffers, and moves them to and from
the accelerator over numbered transport queues. Sends and receives run in
synchronous mode (the call returns only after the completion is recorded) or
asynchronous mode (the call returns a :class:`PendingToken` at once and the
completion arrives later through :meth:`Transport.poll` or a callback).

Time is simulated: each cross-domain hop costs ``transfer_time`` on the
transport's :class:`~aalsim.memory.LinkModel`, and all activity is written to
the engine's event trace under the ``transport`` actor.
"""

import itertools
import threading
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum

from .engine import Engine
from .errors import (BufferNotOwned, BufferTooSmall, InvalidArgument, InvalidCallback,
                     NoDataAvailable, PoolBusy, PoolExhausted, PoolTerminated, QueueFull,
                     UnknownQueue)
from .memory import (HOST, LinkModel, Memory, MemoryDomain, Ownership, PoolState,
                     TransferCounters, crosses_boundary, transfer_time)

ACTOR = "transport"


class Mode(str, Enum):
    SYNC = "Sync"
    ASYNC = "Async"


class OwnershipMode(str, Enum):
    TRANSFER = "TransferToHwa"
    RETAIN = "RetainByApp"


@dataclass
class SendRequest:
    queue: int
    buffers: list
    ownership: OwnershipMode = OwnershipMode.TRANSFER
    mode: Mode = Mode.SYNC
    callback: object = None
    counters: TransferCounters | None = None


@dataclass
class ReceiveRequest:
    """``buffers=None`` asks the HWA to allocate the dequeue buffers itself."""

    queue: int
    buffers: list | None = None
    mode: Mode = Mode.SYNC
    callback: object = None
    timeout_us: float = 0.0
    max_payloads: int = 1
    counters: TransferCounters | None = None

    @property
    def hwa_allocated(self):
        return self.buffers is None


@dataclass(frozen=True)
class CompletionStatus:
    request_id: int
    outcome: str
    reason: str = ""
    returned_buffers: tuple = ()

    @property
    def ok(self):
        return self.outcome == "Success"


class PendingToken:
    def __init__(self, request_id):
        self.request_id = request_id
        self._status = None

    @property
    def done(self):
        return self._status is not None

    @property
    def status(self):
        return self._status

    def __repr__(self):
        return f"PendingToken({self.request_id}, done={self.done})"


@dataclass
class _Queue:
    id: int
    depth: int
    hwa_domain: MemoryDomain
    rx_pool: object
    handler: object
    loopback: bool
    max_payload: int | None
    inflight: int = 0
    rx: deque = field(default_factory=deque)
    waiting_rx: deque = field(default_factory=deque)
    failures: deque = field(default_factory=deque)


class Transport:
    def __init__(self, engine=None, link=None, memory=None, counters=None):
        self.engine = engine if engine is not None else Engine()
        self.link = link if link is not None else LinkModel()
        self.memory = memory if memory is not None else Memory()
        self.counters = counters if counters is not None else TransferCounters()
        self._queues = {}
        self._queue_ids = itertools.count(1)
        self._req_ids = itertools.count(1)
        self._lock = threading.RLock()
        self._callbacks = deque()
        self._tls = threading.local()

    @contextmanager
    def _op(self):
        # callbacks queued while an API call holds the lock are dispatched
        # after it is released
        with self._lock:
            self._tls.depth = getattr(self._tls, "depth", 0) + 1
            try:
                yield
            finally:
                self._tls.depth -= 1
        if self._tls.depth == 0:
            self._dispatch()

    def _dispatch_event(self):
        if getattr(self._tls, "depth", 0) == 0:
            self._dispatch()

    # -- tracing ------------------------------------------------------------

    def _record(self, kind, **fields):
        return self.engine.record(ACTOR, kind, **fields)

    @property
    def trace(self):
        return self.engine.trace

    # -- pools and buffers --------------------------------------------------

    def create_buffer_pool(self, domain, buffer_size, count):
        if buffer_size < 1 or count < 1:
            raise InvalidArgument(f"buffer_size and count must be >= 1 (got {buffer_size}, {count})")
        with self._op():
            pool = self.memory.create_pool(domain, buffer_size, count)
            self._record("pool_create", pool=pool.id, domain=str(domain),
                         size=buffer_size, count=count)
            return pool

    def alloc_buffer(self, pool):
        with self._op():
            buf = pool.allocate()
            self._record("alloc", buf=buf.id, pool=pool.id)
            return buf

    def free_buffer(self, buf):
        with self._op():
            buf.pool_obj.release(buf)
            self._record("free", buf=buf.id, pool=buf.pool)

    def terminate_pool(self, pool):
        with self._op():
            if pool.state is PoolState.TERMINATED:
                raise PoolTerminated(f"pool {pool.id} already terminated")
            if pool.hwa_owned_count():
                raise PoolBusy(f"pool {pool.id} has buffers held by the HWA")
            pool.state = PoolState.TERMINATED
            self._record("pool_terminate", pool=pool.id)

    # -- queues -------------------------------------------------------------

    def open_queue(self, depth=8, hwa_domain=None, rx_domain=HOST, rx_buffer_size=4096,
                   rx_pool_count=8, handler=None, loopback=False, max_payload=None):
        """Open a transport queue to the HWA.

        ``handler(queue_id, payloads)`` sees the bytes of every successful
        send and may return a list of payloads to make available for receive.
        With ``loopback`` the sent payloads themselves become receivable.
        HWA-allocated receives draw from a pool in ``rx_domain``.
        """
        if depth < 1:
            raise InvalidArgument("queue depth must be >= 1")
        hwa_domain = hwa_domain if hwa_domain is not None else MemoryDomain.device(0)
        with self._op():
            qid = next(self._queue_ids)
            rx_pool = self.create_buffer_pool(rx_domain, rx_buffer_size, rx_pool_count)
            self._queues[qid] = _Queue(qid, depth, hwa_domain, rx_pool, handler, loopback,
                                       max_payload)
            self._record("queue_open", queue=qid, depth=depth, hwa=str(hwa_domain))
            return qid

    def _queue(self, qid):
        try:
            return self._queues[qid]
        except KeyError:
            raise UnknownQueue(f"no transport queue {qid}") from None

    def queue_rx_pool(self, qid):
        return self._queue(qid).rx_pool

    def inject_failure(self, qid, reason="injected", count=1):
        """Make the next ``count`` operations on ``qid`` complete with Failure."""
        with self._op():
            self._queue(qid).failures.extend([reason] * count)

    def post_rx(self, qid, payload, delay_us=0.0):
        """HWA side: make ``payload`` available for receive after ``delay_us``."""
        with self._op():
            self._queue(qid)
            self.engine.schedule(delay_us, self._arrive, qid, bytes(payload))

    def _arrive(self, qid, payload):
        q = self._queues[qid]
        q.rx.append(payload)
        self._record("rx_ready", queue=qid, bytes=len(payload))
        self._match_rx(q)

    # -- send ---------------------------------------------------------------

    def send_buffers(self, req):
        if req.callback is not None and req.mode is not Mode.ASYNC:
            raise InvalidCallback("callbacks require Async mode")
        with self._op():
            q = self._queue(req.queue)
            self._check_app_owned(req.buffers)
            if q.inflight >= q.depth:
                raise QueueFull(f"queue {q.id} is full ({q.depth})")
            rid = next(self._req_ids)
            token = PendingToken(rid)
            q.inflight += 1
            self._record("submit", req=rid, op="send", queue=q.id, mode=req.mode.value,
                         ownership=OwnershipMode(req.ownership).value, nbuf=len(req.buffers))
            for buf in req.buffers:
                buf._transition(Ownership.HWA)
                self._record("buf_hwa", buf=buf.id, req=rid)
            cost = sum(transfer_time(b.length, self.link) for b in req.buffers
                       if crosses_boundary(b.domain, q.hwa_domain))
            self.engine.schedule(cost, self._complete_send, q, req, token)
            result = self._finish_submit(req, token)
        return result

    def _complete_send(self, q, req, token):
        rid = token.request_id
        counters = req.counters or self.counters
        q.inflight -= 1
        if q.failures:
            reason = q.failures.popleft()
            for buf in req.buffers:
                buf._transition(Ownership.APP)
                self._record("buf_app", buf=buf.id, req=rid)
            status = CompletionStatus(rid, "Failure", reason, tuple(req.buffers))
        else:
            payloads = []
            for buf in req.buffers:
                payloads.append(buf.read())
                counters.record(buf.domain, q.hwa_domain, buf.length)
            returned = []
            for buf in req.buffers:
                if req.ownership is OwnershipMode.TRANSFER:
                    buf.pool_obj.release(buf, from_hwa=True)
                    self._record("autofree", buf=buf.id, req=rid)
                else:
                    buf._transition(Ownership.APP)
                    self._record("buf_app", buf=buf.id, req=rid)
                    returned.append(buf)
            status = CompletionStatus(rid, "Success", "", tuple(returned))
            produced = list(payloads) if q.loopback else []
            if q.handler is not None:
                produced.extend(q.handler(q.id, payloads) or [])
            for payload in produced:
                q.rx.append(bytes(payload))
                self._record("rx_ready", queue=q.id, bytes=len(payload))
        self._settle(req, token, status)
        self._match_rx(q)

    # -- receive ------------------------------------------------------------

    def receive_buffers(self, req):
        if req.callback is not None and req.mode is not Mode.ASYNC:
            raise InvalidCallback("callbacks require Async mode")
        if req.max_payloads < 1:
            raise InvalidArgument("max_payloads must be >= 1")
        with self._op():
            q = self._queue(req.queue)
            if not req.hwa_allocated:
                if not req.buffers:
                    raise InvalidArgument("app-allocated receive needs at least one buffer")
                self._check_app_owned(req.buffers)
                if q.max_payload is not None:
                    small = [b.id for b in req.buffers if b.capacity < q.max_payload]
                    if small:
                        raise BufferTooSmall(f"buffers {small} smaller than max payload {q.max_payload}")
            if q.inflight >= q.depth:
                raise QueueFull(f"queue {q.id} is full ({q.depth})")
            if req.mode is Mode.SYNC and not q.rx and req.timeout_us <= 0:
                raise NoDataAvailable(f"nothing to receive on queue {q.id}")
            rid = next(self._req_ids)
            token = PendingToken(rid)
            q.inflight += 1
            self._record("submit", req=rid, op="recv", queue=q.id, mode=req.mode.value,
                         dest="HwaAllocated" if req.hwa_allocated else "AppAllocated")
            for buf in req.buffers or ():
                buf._transition(Ownership.HWA)
                self._record("buf_hwa", buf=buf.id, req=rid)
            q.waiting_rx.append((req, token))
            self._match_rx(q)
            if req.mode is Mode.SYNC:
                deadline = self.engine.now + req.timeout_us
                started = lambda: token.done or (req, token) not in q.waiting_rx
                if not self.engine.run_until(started, deadline):
                    q.waiting_rx.remove((req, token))
                    self._settle(req, token, self._unwind_recv(q, req, token, "timeout"))
            result = self._finish_submit(req, token)
        if isinstance(result, CompletionStatus) and not result.ok:
            if result.reason == "BufferTooSmall":
                raise BufferTooSmall(f"request {result.request_id}: payload exceeds buffer")
            if result.reason == "timeout":
                raise NoDataAvailable(f"nothing received on queue {req.queue} within timeout")
        return result

    def _match_rx(self, q):
        # payloads are taken off the rx list at match time and put back in
        # front if the receive fails
        while q.rx and q.waiting_rx:
            req, token = q.waiting_rx.popleft()
            n = len(req.buffers) if not req.hwa_allocated else req.max_payloads
            take = [q.rx.popleft() for _ in range(min(n, len(q.rx)))]
            crossing = sum(len(p) for p in take
                           if crosses_boundary(q.hwa_domain, self._dest_domain(q, req)))
            cost = transfer_time(crossing, self.link) if crossing else 0.0
            self.engine.schedule(cost, self._complete_recv, q, req, token, take)

    @staticmethod
    def _dest_domain(q, req):
        return q.rx_pool.domain if req.hwa_allocated else req.buffers[0].domain

    def _complete_recv(self, q, req, token, take):
        rid = token.request_id
        counters = req.counters or self.counters
        if q.failures:
            status = self._unwind_recv(q, req, token, q.failures.popleft(), take)
        elif req.hwa_allocated:
            if q.rx_pool.free_count < len(take) or any(len(p) > q.rx_pool.buffer_size for p in take):
                status = self._unwind_recv(q, req, token, "PoolExhausted", take)
            else:
                out = []
                for payload in take:
                    buf = q.rx_pool.allocate()
                    buf.write(payload)
                    counters.record(q.hwa_domain, buf.domain, len(payload))
                    self._record("alloc", buf=buf.id, pool=q.rx_pool.id, req=rid)
                    out.append(buf)
                q.inflight -= 1
                status = CompletionStatus(rid, "Success", "", tuple(out))
        elif any(len(p) > b.capacity for p, b in zip(take, req.buffers)):
            status = self._unwind_recv(q, req, token, "BufferTooSmall", take)
        else:
            for payload, buf in zip(take, req.buffers):
                buf.write(payload)
                buf.set_length(len(payload))
                counters.record(q.hwa_domain, buf.domain, len(payload))
            for buf in req.buffers:
                buf._transition(Ownership.APP)
                self._record("buf_app", buf=buf.id, req=rid)
            q.inflight -= 1
            status = CompletionStatus(rid, "Success", "", tuple(req.buffers[:len(take)]))
        self._settle(req, token, status)
        self._match_rx(q)

    def _unwind_recv(self, q, req, token, reason, take=()):
        q.rx.extendleft(reversed(take))
        q.inflight -= 1
        for buf in req.buffers or ():
            buf._transition(Ownership.APP)
            self._record("buf_app", buf=buf.id, req=token.request_id)
        return CompletionStatus(token.request_id, "Failure", reason, tuple(req.buffers or ()))

    # -- completion plumbing ------------------------------------------------

    def _check_app_owned(self, buffers):
        seen = set()
        for buf in buffers:
            if buf.ownership is not Ownership.APP or buf.id in seen:
                raise BufferNotOwned(f"buffer {buf.id} is {buf.ownership.value}, not AppOwned")
            seen.add(buf.id)

    def _settle(self, req, token, status):
        token._status = status
        self._record("complete", req=token.request_id, outcome=status.outcome,
                     reason=status.reason or "-")
        if req.callback is not None:
            self._callbacks.append((req.callback, token.request_id, status))
            self.engine.schedule(0.0, self._dispatch_event)

    def _finish_submit(self, req, token):
        if req.mode is Mode.SYNC:
            if not token.done:
                self.engine.run_until(lambda: token.done)
            self._record("return", req=token.request_id)
            return token.status
        self._record("return", req=token.request_id)
        return token

    def _dispatch(self):
        while True:
            with self._lock:
                if not self._callbacks:
                    return
                cb, rid, status = self._callbacks.popleft()
                self._record("callback", req=rid)
            cb(status)

    def poll(self, token):
        """Advance nothing; report the completion if it has happened."""
        return token.status

    def progress(self, until_us=None):
        """Run the HWA side until ``until_us`` (or until idle)."""
        with self._op():
            self.engine.run(until_us)

    def wait(self, token):
        with self._op():
            self.engine.run_until(lambda: token.done)
        return token.status
