"""Deterministic planning model: one MILP over build flags and hourly dispatch."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from . import solver as S
from .core import Instance, InvestmentPlan, OperationSchedule, ValidationError, investment_cost
from .recourse import (OpBlock, add_adequacy, add_build_vars, add_operation_block, extract_schedule,
                       investment_expr, scenario_data)

log = logging.getLogger(__name__)


class PlanningError(RuntimeError):
    def __init__(self, message, outcome: S.SolveOutcome | None = None):
        super().__init__(message)
        self.outcome = outcome


@dataclass
class DpmModel:
    model: S.Model
    x: dict
    block: OpBlock
    load: object


@dataclass
class PlanResult:
    plan: InvestmentPlan
    schedule: OperationSchedule
    cost_inv: float
    cost_ope: float
    objective: float
    outcome: S.SolveOutcome

    @property
    def cost_total(self) -> float:
        return self.cost_inv + self.cost_ope


def _precheck(inst: Instance):
    cap = sum(u.rated_power for u in inst.catalog.generators)
    if inst.enforce_adequacy and cap < inst.peak_load:
        raise ValidationError(
            f"peak load {inst.peak_load} MW exceeds the whole catalog's generating capacity {cap} MW")


def build_dpm(inst: Instance, delta_t: int = 0) -> DpmModel:
    """Assemble the deterministic model for the nominal forecast under tidal delay ``delta_t``."""
    _precheck(inst)
    from .uncertainty import UncertaintyConfig

    scen = scenario_data(inst, UncertaintyConfig(delta_t=delta_t))
    m = S.Model("dpm")
    x = add_build_vars(m, inst)
    if inst.enforce_adequacy:
        add_adequacy(m, inst, x)
    block = add_operation_block(m, inst, x, scen.load, scen.tpg, water_slack=False)
    m.set_objective(investment_expr(inst, x) + block.cost, "min")
    return DpmModel(m, x, block, scen.load)


def solve_dpm(inst: Instance, delta_t: int = 0, options: S.SolveOptions | None = None,
              backend: str | None = None) -> PlanResult:
    dm = build_dpm(inst, delta_t)
    out = S.solve(dm.model, options, backend)
    if out.values is None:
        raise PlanningError(f"deterministic model {out.status}: {out.message}", out)
    if not out.ok:
        log.warning("deterministic model stopped with status %s; returning incumbent", out.status)
    plan = InvestmentPlan({k: int(round(out[v])) for k, v in dm.x.items()})
    sched = extract_schedule(out, dm.block, inst, dm.load, plan)
    cinv = investment_cost(inst.catalog, plan, inst.grid, inst.econ)
    return PlanResult(plan, sched, cinv, sched.cost_ope, out.objective, out)
