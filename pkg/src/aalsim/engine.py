"""Deterministic discrete-event engine and the append-only event trace.

Scheduled callbacks run in ``(time_us, insertion_seq)`` order. Anything worth
auditing is written to the :class:`EventTrace` with :meth:`Engine.record`.
"""

import heapq
import itertools
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgument


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


@dataclass(frozen=True)
class TraceRecord:
    time_us: float
    seq: int
    actor: str
    kind: str
    fields: tuple = ()

    def get(self, key, default=None):
        for k, v in self.fields:
            if k == key:
                return v
        return default

    def __getitem__(self, key):
        for k, v in self.fields:
            if k == key:
                return v
        raise KeyError(key)

    def to_line(self):
        head = f"{self.time_us!r}\t{self.seq}\t{self.actor}\t{self.kind}"
        return head + "".join(f"\t{k}={_fmt(v)}" for k, v in self.fields)

    @classmethod
    def from_line(cls, line):
        parts = line.rstrip("\n").split("\t")
        if len(parts) < 4:
            raise InvalidArgument(f"malformed trace line: {line!r}")
        fields = []
        for item in parts[4:]:
            key, sep, value = item.partition("=")
            if not sep:
                raise InvalidArgument(f"malformed trace field {item!r}")
            fields.append((key, value))
        return cls(float(parts[0]), int(parts[1]), parts[2], parts[3], tuple(fields))


class EventTrace:
    """Append-only, thread-safe event log."""

    def __init__(self):
        self._records = []
        self._lock = threading.Lock()

    def append(self, time_us, actor, kind, fields):
        with self._lock:
            rec = TraceRecord(float(time_us), len(self._records), actor, kind, tuple(fields))
            self._records.append(rec)
            return rec

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, idx):
        return self._records[idx]

    @property
    def records(self):
        with self._lock:
            return list(self._records)

    def filter(self, kind=None, actor=None, **match):
        out = []
        for rec in self.records:
            if kind is not None and rec.kind != kind:
                continue
            if actor is not None and rec.actor != actor:
                continue
            if any(rec.get(k) != v for k, v in match.items()):
                continue
            out.append(rec)
        return out

    def to_text(self):
        return "".join(rec.to_line() + "\n" for rec in self.records)

    def write(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def from_lines(cls, lines):
        trace = cls()
        for line in lines:
            if line.strip():
                rec = TraceRecord.from_line(line)
                trace._records.append(rec)
        return trace

    @classmethod
    def read(cls, path):
        return cls.from_lines(Path(path).read_text().splitlines())


class Engine:
    def __init__(self, trace=None):
        self.now = 0.0
        self.trace = trace if trace is not None else EventTrace()
        self._heap = []
        self._seq = itertools.count()

    def at(self, time_us, fn, *args):
        if time_us < self.now:
            raise InvalidArgument(f"cannot schedule at {time_us} before now={self.now}")
        heapq.heappush(self._heap, (float(time_us), next(self._seq), fn, args))

    def schedule(self, delay_us, fn, *args):
        if delay_us < 0:
            raise InvalidArgument("delay must be >= 0")
        self.at(self.now + delay_us, fn, *args)

    @property
    def pending(self):
        return len(self._heap)

    def peek_time(self):
        return self._heap[0][0] if self._heap else None

    def step(self):
        if not self._heap:
            return False
        time_us, _, fn, args = heapq.heappop(self._heap)
        self.now = time_us
        fn(*args)
        return True

    def run(self, until=None):
        while self._heap:
            if until is not None and self._heap[0][0] > until:
                self.now = max(self.now, until)
                return
            self.step()
        if until is not None:
            self.now = max(self.now, until)

    def run_until(self, predicate, deadline=None):
        """Process events until ``predicate()`` holds.

        Returns False if the queue empties or the next event lies past
        ``deadline`` first; ``now`` then advances to ``deadline`` if given.
        """
        while not predicate():
            nxt = self.peek_time()
            if nxt is None or (deadline is not None and nxt > deadline):
                if deadline is not None:
                    self.now = max(self.now, deadline)
                return predicate()
            self.step()
        return True

    def record(self, actor, kind, **fields):
        return self.trace.append(self.now, actor, kind, fields.items())
