"""Repeated position-auction simulator for allocating edge-server VMs to offloaded tasks."""
from .errors import (
    DegenerateQuality,
    DomainError,
    GspMecError,
    MissingColumn,
    NoAllocations,
    ParseError,
    PrecisionWarning,
    UnknownPreset,
    ValidationError,
)
from .kernels import BACKEND
from .orchestrator import RunReport, detect_convergence, run_simulation
from .presets import PRESET_NAMES, builtin_preset
from .scenario import Scenario, StrategyKind, load_scenario, write_scenario

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DegenerateQuality",
    "DomainError",
    "GspMecError",
    "MissingColumn",
    "NoAllocations",
    "ParseError",
    "PrecisionWarning",
    "PRESET_NAMES",
    "RunReport",
    "Scenario",
    "StrategyKind",
    "UnknownPreset",
    "ValidationError",
    "builtin_preset",
    "detect_convergence",
    "load_scenario",
    "run_simulation",
    "write_scenario",
]
