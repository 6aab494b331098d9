"""Acceleration abstraction layer simulator.

Subpackages: ``memory`` and ``transport`` (buffers and queues), ``mgmt``
(device registry and lifecycle), ``core`` (LPU / profile instance / queue
hierarchy), ``profiles`` (CRC, FEC, scrambling, modulation chains),
``fronthaul`` (packet codec and reassembly) and ``sim`` (slot-level scenarios).
"""

from . import errors
from .engine import Engine, EventTrace, TraceRecord
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["errors", "Engine", "EventTrace", "TraceRecord", "BACKEND", "__version__"]
