"""Host/device memory domains, buffer pools and host<->device transfer accounting."""

import itertools
import threading
from dataclasses import dataclass
from enum import Enum

from .errors import (BufferTooLarge, DoubleFree, InvalidArgument, NotOwned, PoolExhausted,
                     PoolTerminated)


@dataclass(frozen=True, order=True)
class MemoryDomain:
    kind: str
    device_id: int | None = None

    def __post_init__(self):
        if self.kind == "host":
            if self.device_id is not None:
                raise InvalidArgument("host domain carries no device id")
        elif self.kind == "device":
            if self.device_id is None or self.device_id < 0:
                raise InvalidArgument("device domain needs a nonnegative device id")
        else:
            raise InvalidArgument(f"unknown memory domain kind {self.kind!r}")

    @classmethod
    def device(cls, device_id):
        return cls("device", device_id)

    @property
    def is_host(self):
        return self.kind == "host"

    def __str__(self):
        return "host" if self.is_host else f"dev{self.device_id}"

    @classmethod
    def parse(cls, text):
        if text == "host":
            return HOST
        if text.startswith("dev"):
            return cls.device(int(text[3:]))
        raise InvalidArgument(f"cannot parse memory domain {text!r}")


HOST = MemoryDomain("host")


def crosses_boundary(a, b):
    """True when exactly one of the two domains is host memory."""
    return a.is_host != b.is_host


class Ownership(str, Enum):
    APP = "AppOwned"
    HWA = "HwaOwned"
    FREED = "Freed"


_LEGAL = {
    (Ownership.APP, Ownership.HWA),
    (Ownership.HWA, Ownership.APP),
    (Ownership.APP, Ownership.FREED),
    (Ownership.HWA, Ownership.FREED),
}


class Buffer:
    """A fixed-capacity byte region allocated from a :class:`BufferPool`."""

    __slots__ = ("id", "pool", "domain", "capacity", "length", "ownership", "_data", "_pool_ref")

    def __init__(self, buf_id, pool):
        self.id = buf_id
        self.pool = pool.id
        self.domain = pool.domain
        self.capacity = pool.buffer_size
        self.length = 0
        self.ownership = Ownership.APP
        self._data = bytearray(pool.buffer_size)
        self._pool_ref = pool

    def __repr__(self):
        return (f"Buffer(id={self.id}, pool={self.pool}, domain={self.domain}, "
                f"len={self.length}/{self.capacity}, {self.ownership.value})")

    def write(self, data, offset=0):
        """Copy ``data`` in at ``offset`` and extend ``length`` to cover it."""
        self._check_live()
        end = offset + len(data)
        if offset < 0 or end > self.capacity:
            raise BufferTooLarge(f"write of {len(data)} bytes at {offset} exceeds capacity {self.capacity}")
        self._data[offset:end] = data
        self.length = max(self.length, end)

    def set_length(self, length):
        if not 0 <= length <= self.capacity:
            raise InvalidArgument(f"length {length} outside [0, {self.capacity}]")
        self.length = length

    def read(self, offset=0, length=None):
        self._check_live()
        if length is None:
            length = self.length - offset
        if offset < 0 or length < 0 or offset + length > self.length:
            raise InvalidArgument(f"read [{offset}, {offset + length}) outside length {self.length}")
        return bytes(self._data[offset:offset + length])

    @property
    def data(self):
        return self.read()

    @property
    def pool_obj(self):
        return self._pool_ref

    def _check_live(self):
        if self.ownership is Ownership.FREED:
            raise DoubleFree(f"buffer {self.id} has been freed")

    def _transition(self, new):
        if (self.ownership, new) not in _LEGAL:
            if self.ownership is Ownership.FREED:
                raise DoubleFree(f"buffer {self.id} already freed")
            raise NotOwned(f"buffer {self.id}: illegal {self.ownership.value} -> {new.value}")
        self.ownership = new


class PoolState(str, Enum):
    ACTIVE = "Active"
    TERMINATED = "Terminated"


class BufferPool:
    def __init__(self, pool_id, domain, buffer_size, count, id_source=None):
        if buffer_size < 1 or count < 1:
            raise InvalidArgument(f"buffer_size and count must be >= 1 (got {buffer_size}, {count})")
        self.id = pool_id
        self.domain = domain
        self.buffer_size = buffer_size
        self.count = count
        self.free_count = count
        self.state = PoolState.ACTIVE
        self._ids = id_source if id_source is not None else itertools.count(1)
        self._live = {}
        self._lock = threading.Lock()

    def __repr__(self):
        return (f"BufferPool(id={self.id}, domain={self.domain}, size={self.buffer_size}, "
                f"free={self.free_count}/{self.count}, {self.state.value})")

    @property
    def live_buffers(self):
        with self._lock:
            return list(self._live.values())

    def allocate(self):
        with self._lock:
            if self.state is PoolState.TERMINATED:
                raise PoolTerminated(f"pool {self.id} is terminated")
            if self.free_count == 0:
                raise PoolExhausted(f"pool {self.id} has no free buffers")
            self.free_count -= 1
            buf = Buffer(next(self._ids), self)
            self._live[buf.id] = buf
            return buf

    def release(self, buf, from_hwa=False):
        """Move ``buf`` to Freed and return its slot to the pool.

        Applications may only release buffers they own; ``from_hwa`` is the
        HWA-side auto-free path for buffers whose ownership was transferred.
        """
        with self._lock:
            if buf.ownership is Ownership.FREED:
                raise DoubleFree(f"buffer {buf.id} already freed")
            if buf.ownership is Ownership.HWA and not from_hwa:
                raise NotOwned(f"buffer {buf.id} is owned by the HWA")
            buf._transition(Ownership.FREED)
            del self._live[buf.id]
            self.free_count += 1

    def hwa_owned_count(self):
        with self._lock:
            return sum(1 for b in self._live.values() if b.ownership is Ownership.HWA)


@dataclass(frozen=True)
class LinkModel:
    latency_us: float = 2.0
    bandwidth_bytes_per_us: float = 12_000.0

    def __post_init__(self):
        if self.latency_us < 0:
            raise InvalidArgument("latency_us must be >= 0")
        if not self.bandwidth_bytes_per_us > 0:
            raise InvalidArgument("bandwidth_bytes_per_us must be > 0")


def transfer_time(nbytes, link):
    """Affine link cost: ``latency + bytes / bandwidth`` in microseconds."""
    if nbytes < 0:
        raise InvalidArgument("byte count must be >= 0")
    return link.latency_us + nbytes / link.bandwidth_bytes_per_us


class TransferCounters:
    """Thread-safe copy counters.

    ``listener``, when set, is called as ``listener(src_domain, dst_domain,
    nbytes)`` after every counted copy.
    """

    def __init__(self, listener=None):
        self.host_device_transfers = 0
        self.host_device_bytes = 0
        self.local_copies = 0
        self.local_bytes = 0
        self.listener = listener
        self._lock = threading.Lock()

    def record(self, src, dst, nbytes):
        with self._lock:
            if crosses_boundary(src, dst):
                self.host_device_transfers += 1
                self.host_device_bytes += nbytes
            else:
                self.local_copies += 1
                self.local_bytes += nbytes
        if self.listener is not None:
            self.listener(src, dst, nbytes)

    def snapshot(self):
        with self._lock:
            return {
                "host_device_transfers": self.host_device_transfers,
                "host_device_bytes": self.host_device_bytes,
                "local_copies": self.local_copies,
                "local_bytes": self.local_bytes,
            }


def copy_across(src, dst_pool, counters):
    """Copy ``src`` into a fresh buffer of ``dst_pool`` and count the hop."""
    if src.ownership is Ownership.FREED:
        raise DoubleFree(f"source buffer {src.id} has been freed")
    if src.length > dst_pool.buffer_size:
        raise BufferTooLarge(f"{src.length} bytes do not fit pool {dst_pool.id} buffers of {dst_pool.buffer_size}")
    dst = dst_pool.allocate()
    dst.write(src.read())
    counters.record(src.domain, dst_pool.domain, src.length)
    return dst


class Memory:
    """Owns a set of pools and a shared buffer-id space."""

    def __init__(self):
        self._pools = {}
        self._pool_ids = itertools.count(1)
        self._buf_ids = itertools.count(1)
        self._lock = threading.Lock()

    def create_pool(self, domain, buffer_size, count):
        with self._lock:
            pool = BufferPool(next(self._pool_ids), domain, buffer_size, count, self._buf_ids)
            self._pools[pool.id] = pool
            return pool

    def pool(self, pool_id):
        return self._pools[pool_id]

    @property
    def pools(self):
        with self._lock:
            return list(self._pools.values())

    def live_buffer_count(self):
        return sum(len(p.live_buffers) for p in self.pools)

    def outstanding(self):
        """Sum over pools of ``count - free_count``."""
        return sum(p.count - p.free_count for p in self.pools)
