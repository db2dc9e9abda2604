"""Capacity planning for islanded offshore microgrids with tidal power and desalination.

Two planners share one dispatch model: a deterministic MILP on the nominal
forecast (:func:`solve_dpm`) and a two-stage robust model solved by
column-and-constraint generation (:func:`ccg_solve`) against budget
uncertainty on load and tidal output.
"""

from .core import (DesalinationUnit, DeviceCatalog, DispatchableUnit, EconomicParams, ForecastSet,
                   Instance, InvestmentPlan, OperationSchedule, RenewableUnit, StorageUnit, TidalUnit,
                   TimeGrid, ValidationError, investment_cost, operation_cost, present_worth_factor)
from .dpm import PlanningError, PlanResult, solve_dpm
from .evaluate import SweepSpec, dispatch, generation_percentages, shed_under_worst, sweep
from .rpm import CcgResult, WorstCase, ccg_solve, robust_brute_force, worst_case
from .solver import SolveOptions
from .tidal import apply_delay, tidal_power
from .uncertainty import Realization, UncertaintyConfig
from .verify import Violation, verify_schedule

__version__ = "0.1.0"

__all__ = [
    "DesalinationUnit", "DeviceCatalog", "DispatchableUnit", "EconomicParams", "ForecastSet",
    "Instance", "InvestmentPlan", "OperationSchedule", "RenewableUnit", "StorageUnit", "TidalUnit",
    "TimeGrid", "ValidationError", "investment_cost", "operation_cost", "present_worth_factor",
    "PlanningError", "PlanResult", "solve_dpm", "SweepSpec", "dispatch", "generation_percentages",
    "shed_under_worst", "sweep", "CcgResult", "WorstCase", "ccg_solve", "robust_brute_force",
    "worst_case", "SolveOptions", "apply_delay", "tidal_power", "Realization", "UncertaintyConfig",
    "Violation", "verify_schedule",
]
