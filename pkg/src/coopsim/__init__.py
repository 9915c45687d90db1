"""Slotted simulation of device-centric (DcC) and source-centric (ScC)
cooperative content streaming, with a fluid utility-maximization oracle."""

__version__ = "0.1.0"

from .engine import Trace, TraceRecord, run, step
from .errors import (ConfigError, CoopSimError, MetricError, OracleError,
                     ScheduleSearchError)
from .metrics import RunSummary, summarize
from .model import ChannelConfig, LocalMode, Scheme, SimConfig, load_config, validate_config
from .oracle import FluidInstance, OracleSolution, solve_fluid, utility_gap

__all__ = [
    "ChannelConfig", "ConfigError", "CoopSimError", "FluidInstance", "LocalMode",
    "MetricError", "OracleError", "OracleSolution", "RunSummary", "ScheduleSearchError",
    "Scheme", "SimConfig", "Trace", "TraceRecord", "load_config", "run", "solve_fluid",
    "step", "summarize", "utility_gap", "validate_config",
]
