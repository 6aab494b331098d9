"""Per-slot metrics, run reports, and the fold that rebuilds them from a trace."""

import hashlib
from dataclasses import asdict, dataclass, field

from ..memory import MemoryDomain, crosses_boundary

REPORT_SCHEMA = 1

RUN_CSV_COLUMNS = ("slot", "status", "host_device_transfers", "host_device_bytes",
                   "slot_latency_us", "deadline_missed")
COMPARE_CSV_COLUMNS = ("mode", "slots", "host_device_transfers", "host_device_bytes",
                       "mean_slot_latency_us", "deadline_misses", "output_sha256")

DELIVERED = ("ok", "crc_fail")


@dataclass
class SlotMetrics:
    slot: int
    status: str = "pending"
    host_device_transfers: int = 0
    host_device_bytes: int = 0
    slot_latency_us: float | None = None
    deadline_missed: bool = False
    output_sha256: str = "-"
    reason: str = ""

    def csv_row(self):
        lat = "" if self.slot_latency_us is None else repr(self.slot_latency_us)
        return [self.slot, self.status, self.host_device_transfers, self.host_device_bytes,
                lat, int(self.deadline_missed)]


def combined_digest(slots):
    h = hashlib.sha256()
    for s in slots:
        h.update(s.output_sha256.encode())
        h.update(b"\n")
    return h.hexdigest()


@dataclass
class MetricsReport:
    direction: str
    mode: str
    accelerated_stages: tuple
    seed: int
    slot_duration_us: float
    slots: list = field(default_factory=list)

    @property
    def output_sha256(self):
        return combined_digest(self.slots)

    def aggregates(self):
        delivered = [s for s in self.slots if s.status in DELIVERED]
        lat = [s.slot_latency_us for s in delivered]
        n = len(self.slots)
        total_x = sum(s.host_device_transfers for s in self.slots)
        return {
            "slots": n,
            "ok_slots": sum(s.status == "ok" for s in self.slots),
            "failed_slots": sum(s.status not in DELIVERED for s in self.slots),
            "crc_failures": sum(s.status == "crc_fail" for s in self.slots),
            "host_device_transfers": total_x,
            "host_device_bytes": sum(s.host_device_bytes for s in self.slots),
            "transfers_per_slot": total_x / n if n else 0.0,
            "mean_slot_latency_us": sum(lat) / len(lat) if lat else None,
            "max_slot_latency_us": max(lat) if lat else None,
            "deadline_misses": sum(s.deadline_missed for s in self.slots),
            "output_sha256": self.output_sha256,
        }

    def to_dict(self):
        return {
            "schema_version": REPORT_SCHEMA,
            "kind": "run",
            "direction": self.direction,
            "mode": self.mode,
            "accelerated_stages": list(self.accelerated_stages),
            "seed": self.seed,
            "slot_duration_us": self.slot_duration_us,
            "slots": [asdict(s) for s in self.slots],
            "aggregate": self.aggregates(),
        }

    @property
    def failed(self):
        return any(s.status != "ok" for s in self.slots)

    @property
    def deadline_misses(self):
        return sum(s.deadline_missed for s in self.slots)


@dataclass
class CompareReport:
    direction: str
    inline: MetricsReport
    lookaside: MetricsReport

    @property
    def transfer_ratio(self):
        a = self.inline.aggregates()["host_device_transfers"]
        b = self.lookaside.aggregates()["host_device_transfers"]
        return b / a if a else None

    @property
    def outputs_identical(self):
        return self.inline.output_sha256 == self.lookaside.output_sha256

    def to_dict(self):
        return {
            "schema_version": REPORT_SCHEMA,
            "kind": "compare",
            "direction": self.direction,
            "inline": self.inline.to_dict(),
            "lookaside": self.lookaside.to_dict(),
            "transfer_ratio": self.transfer_ratio,
            "outputs_identical": self.outputs_identical,
        }

    def csv_rows(self):
        rows = []
        for name, rep in (("inline", self.inline), ("lookaside", self.lookaside)):
            agg = rep.aggregates()
            mean = agg["mean_slot_latency_us"]
            rows.append([name, agg["slots"], agg["host_device_transfers"],
                         agg["host_device_bytes"], "" if mean is None else repr(mean),
                         agg["deadline_misses"], agg["output_sha256"]])
        return rows

    @property
    def failed(self):
        return self.inline.failed or self.lookaside.failed

    @property
    def deadline_misses(self):
        return self.inline.deadline_misses + self.lookaside.deadline_misses


def _int(v):
    return int(v)


def fold_trace(records):
    """Rebuild a :class:`MetricsReport` from trace records alone.

    Only the ``sim`` bookkeeping events and the ``mem``/``xfer`` copy events
    are consulted; transfer crossings are recomputed from the domain names.
    Works on live records and on records parsed back from text.
    """
    header = None
    slots = {}
    starts = {}
    deadline = {}
    for rec in records:
        if rec.actor == "sim" and rec.kind == "scenario":
            stages = rec["stages"]
            header = dict(direction=rec["direction"], mode=rec["mode"],
                          accelerated_stages=tuple(int(x) for x in stages.split(",") if x and x != "-"),
                          seed=_int(rec["seed"]), slot_duration_us=float(rec["slot_us"]))
        elif rec.actor == "sim" and rec.kind == "slot_start":
            s = _int(rec["slot"])
            slots[s] = SlotMetrics(s)
            starts[s] = rec.time_us
            deadline[s] = float(rec["deadline"])
        elif rec.actor == "mem" and rec.kind == "xfer":
            s = _int(rec["slot"])
            src, dst = MemoryDomain.parse(str(rec["src"])), MemoryDomain.parse(str(rec["dst"]))
            if crosses_boundary(src, dst):
                slots[s].host_device_transfers += 1
                slots[s].host_device_bytes += _int(rec["bytes"])
        elif rec.actor == "sim" and rec.kind == "slot_done":
            s = _int(rec["slot"])
            m = slots[s]
            m.status = str(rec["status"])
            m.output_sha256 = str(rec["out"])
            m.reason = "" if rec.get("reason") in (None, "-") else str(rec["reason"])
            m.slot_latency_us = rec.time_us - starts[s]
            m.deadline_missed = m.status in DELIVERED and rec.time_us > deadline[s]
    if header is None:
        raise ValueError("trace has no scenario header")
    return MetricsReport(slots=[slots[k] for k in sorted(slots)], **header)
