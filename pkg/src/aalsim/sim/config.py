"""Scenario configuration: a versioned JSON document validated with pydantic.

Unknown keys are rejected. Validation failures are collected into a
:class:`~aalsim.errors.ConfigInvalid` whose ``diagnostics`` name the offending
field by dotted path (``pipeline.code.kind``, ``offload_mode.accelerated_stages``).
"""

import json
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import AalError, ConfigInvalid
from ..fronthaul.packet import segment_lengths
from ..memory import LinkModel
from ..mgmt import HwaDescriptor, PartitionKind, Profile
from ..profiles import CodeSpec, Modulation, PipelineConfig, ScramblerSpec
from ..profiles.crc import CRC_BITS
from ..profiles.fec import load_generator_matrix
from ..profiles.pipeline import IQ_SAMPLE_BYTES, NUM_STAGES

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LinkConfig(_Strict):
    latency_us: float = Field(2.0, ge=0)
    bandwidth_bytes_per_us: float = Field(12_000.0, gt=0)

    def model(self):
        return LinkModel(self.latency_us, self.bandwidth_bytes_per_us)


class DropConfig(_Strict):
    slot: int = Field(ge=0)
    seq: int = Field(ge=0)


class ChannelConfig(_Strict):
    order: Literal["identity", "reverse", "random"] = "identity"
    spacing_us: float = Field(1.0, ge=0)
    max_jitter_us: float = Field(0.0, ge=0)
    duplicate_prob: float = Field(0.0, ge=0, le=1)
    drops: list[DropConfig] = Field(default_factory=list)


class CodeConfig(_Strict):
    kind: Literal["hamming74", "generator"] = "hamming74"
    rows: list[str] | None = None
    matrix_file: str | None = None

    @model_validator(mode="after")
    def _generator_source(self):
        if self.kind == "generator" and (self.rows is None) == (self.matrix_file is None):
            raise ValueError("kind 'generator' needs exactly one of 'rows' or 'matrix_file'")
        if self.kind == "hamming74" and (self.rows is not None or self.matrix_file is not None):
            raise ValueError("'rows'/'matrix_file' only apply to kind 'generator'")
        return self


class PipelineSection(_Strict):
    modulation: Modulation = Modulation.QPSK
    code: CodeConfig = Field(default_factory=CodeConfig)
    scrambler_seed: int = Field(0b1011101, ge=1, le=127)
    lfsr_taps: int = Field(0b1100000, ge=1, le=127)
    max_decode_iters: int = Field(8, ge=0)
    crc: Literal["crc16_xmodem"] = "crc16_xmodem"


class OffloadConfig(_Strict):
    kind: Literal["inline", "lookaside"] = "inline"
    accelerated_stages: list[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _stages(self):
        st = self.accelerated_stages
        if self.kind == "inline" and st:
            raise ValueError("accelerated_stages only apply to lookaside")
        if self.kind == "lookaside":
            if not st:
                raise ValueError("lookaside needs at least one accelerated stage")
            bad = [i for i in st if not 0 <= i < NUM_STAGES]
            if bad:
                raise ValueError(f"stage indices {bad} outside 0..{NUM_STAGES - 1}")
            if len(set(st)) != len(st):
                raise ValueError("accelerated_stages contains duplicates")
        return self


def _six(default):
    return Field(default_factory=lambda: [default] * NUM_STAGES,
                 min_length=NUM_STAGES, max_length=NUM_STAGES)


class TimingConfig(_Strict):
    """Simulated costs in microseconds. Stage times are per stage index."""

    host_stage_us: list[float] = _six(20.0)
    device_stage_us: list[float] = _six(5.0)
    cplane_us: float = Field(5.0, ge=0)
    ru_tx_offset_us: float = Field(20.0, ge=0)
    nic_tx_us_per_packet: float = Field(1.0, ge=0)
    place_overhead_us: float = Field(0.5, ge=0)
    place_us_per_byte: float = Field(0.0005, ge=0)

    @model_validator(mode="after")
    def _nonneg(self):
        if any(t < 0 for t in self.host_stage_us + self.device_stage_us):
            raise ValueError("stage times must be >= 0")
        return self


class DeviceConfig(_Strict):
    device_id: int = Field(0, ge=0)
    vendor_tag: str = "soft-gpu"
    partition_kind: PartitionKind = PartitionKind.SOFT
    num_lpus: int = Field(1, ge=1)
    supported_profiles: list[Profile] = Field(
        default_factory=lambda: [Profile.FEC_LOOKASIDE, Profile.HIGH_PHY_INLINE], min_length=1)
    firmware_version: str = "1.0.0"

    def descriptor(self):
        return HwaDescriptor(self.device_id, self.vendor_tag, self.partition_kind, self.num_lpus,
                             frozenset(self.supported_profiles), self.firmware_version)


class ScenarioConfig(_Strict):
    schema_version: Literal[1]
    direction: Literal["uplink", "downlink", "compare_modes"]
    compare_direction: Literal["uplink", "downlink"] = "downlink"
    slot_duration_us: float = Field(gt=0)
    scs_khz: int | None = None
    num_slots: int = Field(1, ge=1, le=100_000)
    tb_size_bytes: int = Field(gt=0)
    mtu: int = Field(1516, gt=16, le=9216)
    reorder_strategy: Literal["streaming", "sequential"] = "streaming"
    link: LinkConfig = Field(default_factory=LinkConfig)
    channel: ChannelConfig = Field(default_factory=ChannelConfig)
    pipeline: PipelineSection = Field(default_factory=PipelineSection)
    offload_mode: OffloadConfig = Field(default_factory=OffloadConfig)
    timing: TimingConfig = Field(default_factory=TimingConfig)
    devices: list[DeviceConfig] = Field(default_factory=lambda: [DeviceConfig()], min_length=1)

    @model_validator(mode="after")
    def _numerology(self):
        if self.scs_khz is not None:
            if self.scs_khz not in (15, 30, 60, 120, 240):
                raise ValueError(f"scs_khz {self.scs_khz} is not a supported numerology")
            expect = slot_duration_for_scs(self.scs_khz)
            if self.slot_duration_us != expect:
                raise ValueError(f"slot_duration_us {self.slot_duration_us} does not match "
                                 f"scs_khz {self.scs_khz} (expected {expect})")
        return self

    @model_validator(mode="after")
    def _compare_needs_lookaside(self):
        if self.direction == "compare_modes" and self.offload_mode.kind != "lookaside":
            raise ValueError("compare_modes needs offload_mode.kind 'lookaside' to name the "
                             "accelerated stages")
        return self

    @property
    def direction_run(self):
        """The direction actually simulated (compare_modes delegates)."""
        return self.compare_direction if self.direction == "compare_modes" else self.direction


def slot_duration_for_scs(scs_khz):
    return 1000.0 / (scs_khz / 15)


def _path(loc):
    return ".".join(str(p) for p in loc) or "<root>"


def _semantic_checks(cfg, base_dir):
    """Cross-field checks pydantic cannot express locally. Returns diagnostics."""
    diags = []
    try:
        pcfg = build_pipeline_config(cfg, base_dir)
    except (AalError, OSError) as exc:
        return [("pipeline.code", str(exc))]
    k, n = pcfg.code.k, pcfg.code.n
    info_bits = 8 * cfg.tb_size_bytes + CRC_BITS
    if info_bits % k:
        diags.append(("tb_size_bytes", f"{info_bits} bits (TB + CRC) do not split into "
                                       f"{k}-bit code blocks"))
    else:
        coded = info_bits // k * n
        bps = pcfg.modulation.bits_per_symbol
        if coded % bps:
            diags.append(("tb_size_bytes", f"{coded} coded bits are not a multiple of "
                                           f"{bps} bits per {pcfg.modulation.value} symbol"))
        else:
            iq_bytes = coded // bps * IQ_SAMPLE_BYTES
            npk = len(segment_lengths(iq_bytes, cfg.mtu))
            for i, d in enumerate(cfg.channel.drops):
                if d.slot >= cfg.num_slots:
                    diags.append((f"channel.drops.{i}.slot", f"slot {d.slot} >= num_slots"))
                if d.seq >= npk:
                    diags.append((f"channel.drops.{i}.seq",
                                  f"seq {d.seq} >= packets per slot ({npk})"))
    ids = [d.device_id for d in cfg.devices]
    if len(set(ids)) != len(ids):
        diags.append(("devices", "duplicate device_id"))
    for i, d in enumerate(cfg.devices):
        try:
            d.descriptor()
        except AalError as exc:
            diags.append((f"devices.{i}", str(exc)))
    if not any(Profile.HIGH_PHY_INLINE in d.supported_profiles for d in cfg.devices):
        diags.append(("devices", "no device supports HighPhyInline"))
    return diags


def build_pipeline_config(cfg, base_dir=None):
    p = cfg.pipeline
    if p.code.kind == "hamming74":
        G = CodeSpec.hamming74().G
    elif p.code.rows is not None:
        rows = p.code.rows
        if not rows or any(set(r) - {"0", "1"} or len(r) != len(rows[0]) for r in rows):
            raise ConfigInvalid([("pipeline.code.rows", "rows must be equal-length 0/1 strings")])
        G = np.array([[int(c) for c in r] for r in rows], dtype=np.uint8)
    else:
        path = Path(p.code.matrix_file)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        G = load_generator_matrix(path)
    code = CodeSpec(p.code.kind, G, p.max_decode_iters)
    return PipelineConfig(code, ScramblerSpec(p.scrambler_seed, p.lfsr_taps), p.modulation, p.crc)


def validate_config(data, base_dir=None):
    """Validate a parsed JSON document; raise :class:`ConfigInvalid` on error."""
    if not isinstance(data, dict):
        raise ConfigInvalid([("<root>", "config must be a JSON object")])
    try:
        cfg = ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        diags = [(_path(e["loc"]), e["msg"]) for e in exc.errors()]
        raise ConfigInvalid(diags) from None
    diags = _semantic_checks(cfg, base_dir)
    if diags:
        raise ConfigInvalid(diags)
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigInvalid([("<file>", f"cannot read {path}: {exc.strerror}")]) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid([("<json>", f"line {exc.lineno} col {exc.colno}: {exc.msg}")]) from None
    return validate_config(data, base_dir=path.parent)
