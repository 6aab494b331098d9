"""Deterministic fronthaul channel: reordering, drops, duplicates and delay."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgument


@dataclass(frozen=True)
class ChannelSpec:
    """``permutation[k]`` is the index of the packet delivered k-th.

    ``delays_us`` is indexed by packet index; packet k leaves the sender at
    ``k * spacing_us``. Delivery order always follows ``permutation``.
    """

    permutation: tuple | None = None
    drop: frozenset = field(default_factory=frozenset)
    duplicate: frozenset = field(default_factory=frozenset)
    delays_us: tuple | None = None
    spacing_us: float = 0.0

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def reverse(cls, n, spacing_us=0.0):
        return cls(permutation=tuple(range(n - 1, -1, -1)), spacing_us=spacing_us)

    @classmethod
    def random(cls, n, seed, *, drop_prob=0.0, dup_prob=0.0, max_delay_us=0.0,
               spacing_us=0.0, shuffle=True):
        rng = np.random.default_rng(seed)
        perm = tuple(int(i) for i in rng.permutation(n)) if shuffle else None
        drop = frozenset(int(i) for i in np.flatnonzero(rng.random(n) < drop_prob))
        dup = frozenset(int(i) for i in np.flatnonzero(rng.random(n) < dup_prob))
        delays = tuple(float(d) for d in np.round(rng.random(n) * max_delay_us, 3))
        return cls(perm, drop, dup, delays, spacing_us)


@dataclass(frozen=True)
class Delivery:
    time_us: float
    packet: object


def apply_channel(packets, spec, start_us=0.0):
    """Timed delivery schedule for ``packets`` under ``spec``."""
    n = len(packets)
    seqs = {p.seq_num for p in packets}
    if not spec.drop <= seqs or not spec.duplicate <= seqs:
        raise InvalidArgument("drop/duplicate sets must name seq_nums of the given packets")
    order = spec.permutation if spec.permutation is not None else tuple(range(n))
    if sorted(order) != list(range(n)):
        raise InvalidArgument(f"permutation is not a permutation of {n} packets")
    if spec.delays_us is not None and len(spec.delays_us) != n:
        raise InvalidArgument("delays_us needs one entry per packet")
    schedule, last = [], start_us
    for k, idx in enumerate(order):
        pkt = packets[idx]
        if pkt.seq_num in spec.drop:
            continue
        delay = spec.delays_us[idx] if spec.delays_us is not None else 0.0
        t = max(last, start_us + k * spec.spacing_us + delay)
        schedule.append(Delivery(t, pkt))
        if pkt.seq_num in spec.duplicate:
            schedule.append(Delivery(t, pkt))
        last = t
    return schedule
