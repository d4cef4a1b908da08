"""Mini-slot MAC scheduling for machine-type devices: assignment, simulation, surrogate."""

from .analytic import OverloadError, derive_cycles
from .assigner import brute_force_assign, overall_assign
from .core import (
    Assignment,
    DeviceProfile,
    PriorityClass,
    ProtocolParams,
    QosSpec,
    validate_scenario,
)
from .simulator import PerfReport, SimOptions, simulate

__version__ = "0.1.0"

__all__ = [
    "OverloadError", "derive_cycles", "brute_force_assign", "overall_assign",
    "Assignment", "DeviceProfile", "PriorityClass", "ProtocolParams", "QosSpec",
    "validate_scenario", "PerfReport", "SimOptions", "simulate",
]
