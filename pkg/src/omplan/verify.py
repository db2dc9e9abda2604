"""Post-hoc audit of an operation schedule against the dispatch constraints."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Instance, InvestmentPlan, OperationSchedule
from .recourse import scenario_data
from .uncertainty import Realization, UncertaintyConfig


@dataclass(frozen=True)
class Violation:
    constraint: str
    index: tuple
    residual: float

    def __str__(self):
        return f"{self.constraint}{list(self.index)}: residual {self.residual:.3g}"


def verify_schedule(inst: Instance, plan: InvestmentPlan, schedule: OperationSchedule,
                    realization: Realization | None = None, uconfig: UncertaintyConfig | None = None,
                    tol: float = 1e-6, *, allow_water_shortfall: bool = True) -> list[Violation]:
    """Return every violated constraint (empty list when the schedule is valid).

    Residuals are compared against ``tol * max(1, |reference|)``. The daily
    water check counts the shortfall slack when ``allow_water_shortfall`` is
    set; otherwise any slack is itself reported as a water violation.
    """
    plan.check(inst.catalog)
    scen = scenario_data(inst, uconfig, realization)
    cat, grid = inst.catalog, inst.grid
    H, D, Y = grid.shape
    sdu = cat.desalination
    out: list[Violation] = []

    def check_le(name, lhs, rhs):
        lhs = np.asarray(lhs, dtype=float)
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), lhs.shape)
        excess = lhs - rhs
        bad = excess > tol * np.maximum(1.0, np.abs(rhs))
        for idx in zip(*np.nonzero(bad)):
            out.append(Violation(name, tuple(int(i) + 1 for i in idx), float(excess[idx])))

    def check_eq(name, lhs, rhs):
        lhs = np.asarray(lhs, dtype=float)
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), lhs.shape)
        res = lhs - rhs
        bad = np.abs(res) > tol * np.maximum(1.0, np.abs(rhs))
        for idx in zip(*np.nonzero(bad)):
            out.append(Violation(name, tuple(int(i) + 1 for i in idx), float(res[idx])))

    def nonneg(name, arr):
        check_le(f"{name}>=0", -np.asarray(arr, dtype=float), 0.0)

    for u in cat.dispatchable:
        p = schedule.gen[u.id]
        nonneg(f"gen[{u.id}]", p)
        check_le(f"du_limit[{u.id}]", p, u.rated_power * plan[u.id])
    for j, u in enumerate(cat.renewable):
        p = schedule.gen[u.id]
        nonneg(f"gen[{u.id}]", p)
        cap = (u.rated_power if inst.ndu_mode == "rated"
               else inst.forecasts.ndu_availability[j]) * plan[u.id]
        check_le(f"ndu_limit[{u.id}]", p, cap)
    for k, u in enumerate(cat.tidal):
        p = schedule.gen[u.id]
        nonneg(f"gen[{u.id}]", p)
        check_le(f"tpg_limit[{u.id}]", p, np.minimum(u.rated_power, scen.tpg[k]) * plan[u.id])

    nonneg("shed", schedule.shed)
    check_le("shed_limit", schedule.shed, scen.load)
    for l, u in enumerate(cat.storage):
        for name, arr, cap in (("ess_discharge", schedule.ess_discharge[l], u.rated_power),
                               ("ess_charge", schedule.ess_charge[l], u.rated_power),
                               ("soc", schedule.soc[l], u.rated_energy)):
            nonneg(f"{name}[{u.id}]", arr)
            check_le(f"{name}_limit[{u.id}]", arr, cap * plan[u.id])
        eta = u.efficiency
        after = schedule.soc[l] + eta * schedule.ess_charge[l] - schedule.ess_discharge[l] / eta
        if H > 1:
            check_eq(f"soc_dynamics[{u.id}]", schedule.soc[l][1:], after[:-1])
        check_eq(f"soc_cyclic[{u.id}]", schedule.soc[l][:1], after[-1:])

    nonneg("water", schedule.water)
    check_le("water_limit", schedule.water, sdu.rated_capacity)

    supply = sum(schedule.gen[u.id] for u in cat.generators) if cat.generators else np.zeros(grid.shape)
    if len(cat.storage):
        supply = supply + schedule.ess_discharge.sum(axis=0) - schedule.ess_charge.sum(axis=0)
    demand = scen.load + sdu.power_per_ton * schedule.water - schedule.shed
    check_eq("power_balance", supply, demand)

    produced = schedule.water.sum(axis=0)
    slack = np.asarray(schedule.water_shortfall, dtype=float)
    nonneg("water_shortfall", slack)
    if allow_water_shortfall:
        produced = produced + slack
    check_le("daily_water", -produced, -sdu.daily_demand)
    return out
