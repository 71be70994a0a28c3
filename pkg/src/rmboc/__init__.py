"""rmboc: cycle-accurate simulator of a segmented-bus circuit-switched NoC."""

from .analysis import max_total_comm, oracle_max_total_comm, worst_case_latency
from .engine import (
    DestroyEvent,
    ReconfigureEvent,
    RefuseEvent,
    RequestEvent,
    RunConfig,
    SendEvent,
    run,
)
from .scenario import format_scenario, parse_scenario
from .topology import build_1d, build_2d, neighbor

__version__ = "0.1.0"

__all__ = [
    "DestroyEvent",
    "ReconfigureEvent",
    "RefuseEvent",
    "RequestEvent",
    "RunConfig",
    "SendEvent",
    "build_1d",
    "build_2d",
    "format_scenario",
    "max_total_comm",
    "neighbor",
    "oracle_max_total_comm",
    "parse_scenario",
    "run",
    "worst_case_latency",
    "__version__",
]
