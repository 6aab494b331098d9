"""Deterministic slot-level simulation of inline and lookaside offload."""

from .config import (SCHEMA_VERSION, ScenarioConfig, build_pipeline_config, load_config,
                     slot_duration_for_scs, validate_config)
from .conformance import check_slot_flow, milestones
from .metrics import (COMPARE_CSV_COLUMNS, RUN_CSV_COLUMNS, CompareReport, MetricsReport,
                      SlotMetrics, fold_trace)
from .scenario import (OffloadPlan, Simulation, compare_modes, run_downlink_slot, run_scenario,
                       run_uplink_slot)

__all__ = [
    "SCHEMA_VERSION", "ScenarioConfig", "build_pipeline_config", "load_config",
    "slot_duration_for_scs", "validate_config",
    "check_slot_flow", "milestones",
    "COMPARE_CSV_COLUMNS", "RUN_CSV_COLUMNS", "CompareReport", "MetricsReport", "SlotMetrics",
    "fold_trace",
    "OffloadPlan", "Simulation", "compare_modes", "run_downlink_slot", "run_scenario",
    "run_uplink_slot",
]
