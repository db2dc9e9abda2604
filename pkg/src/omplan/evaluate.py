"""Auditing fixed plans and running parameter sweeps.

The audit answers "what happens if this plan meets that realization?" and is
how a deterministic plan is checked against the robust worst case. Sweeps
run one planning or audit job per cell of a Cartesian grid over the
uncertainty parameters and collect one flat row per cell.
"""

from __future__ import annotations

import itertools
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import solver as S
from .core import DeviceCatalog, Instance, InvestmentPlan, OperationSchedule, ValidationError, investment_cost
from .dpm import solve_dpm
from .recourse import DispatchLP, scenario_data
from .rpm import WorstCase, ccg_solve, worst_case
from .uncertainty import Realization, UncertaintyConfig

log = logging.getLogger(__name__)

SWEEP_AXES = ("beta_load", "beta_tpg", "gamma_load", "gamma_tpg", "delta_t", "beta", "gamma")
JOBS = ("rpm", "dpm", "audit")


def dispatch(inst: Instance, plan: InvestmentPlan, realization: Realization | None = None,
             uconfig: UncertaintyConfig | None = None, options: S.SolveOptions | None = None,
             backend: str | None = None) -> OperationSchedule:
    """Cheapest operation of ``plan`` once ``realization`` is known.

    Unmet water demand is allowed at a penalty, so the LP is always
    feasible; a positive ``schedule.water_shortfall`` means the plan cannot
    supply the desalination unit.
    """
    scen = scenario_data(inst, uconfig, realization)
    lp = DispatchLP(inst, plan, scen)
    sched = lp.schedule(lp.solve(options, backend))
    if float(np.sum(sched.water_shortfall)) > 1e-6:
        log.warning("plan leaves %.3f t of fresh water unproduced", float(np.sum(sched.water_shortfall)))
    return sched


def audit(inst: Instance, plan: InvestmentPlan, uconfig: UncertaintyConfig, method: str = "dual",
          options: S.SolveOptions | None = None, backend: str | None = None) -> WorstCase:
    """Worst-case realization for ``plan`` together with its dispatch."""
    return worst_case(inst, plan, uconfig, method, options, backend)


def shed_under_worst(inst: Instance, plan: InvestmentPlan, uconfig: UncertaintyConfig,
                     method: str = "dual", options: S.SolveOptions | None = None,
                     backend: str | None = None) -> float:
    """Total load shed (MW summed over every slot) under the plan's worst case."""
    return audit(inst, plan, uconfig, method, options, backend).schedule.total_shed


def generation_percentages(schedule: OperationSchedule, catalog: DeviceCatalog) -> dict[str, float]:
    """Daily average share of generation per technology.

    Technologies are ``dispatchable``, ``tidal`` and each renewable ``kind``
    (``wind``, ``solar``...). For every day the share is the technology's
    energy over the energy of all generating units (storage discharge is not
    generation); days without generation are skipped and the shares are then
    averaged over the remaining days. Shares sum to one unless nothing
    generates at all, in which case every share is 0.
    """
    groups: dict[str, list[str]] = {"dispatchable": [u.id for u in catalog.dispatchable]}
    for u in catalog.renewable:
        groups.setdefault(u.kind, []).append(u.id)
    groups["tidal"] = [u.id for u in catalog.tidal]
    daily = {}
    for tech, ids in groups.items():
        arrs = [np.asarray(schedule.gen[i]) for i in ids if i in schedule.gen]
        daily[tech] = sum(a.sum(axis=0) for a in arrs) if arrs else 0.0
    total = sum(np.asarray(v, dtype=float) for v in daily.values())
    total = np.broadcast_to(total, np.shape(schedule.water_shortfall))
    active = total > 0
    if not np.any(active):
        return {tech: 0.0 for tech in groups}
    out = {}
    for tech, energy in daily.items():
        energy = np.broadcast_to(np.asarray(energy, dtype=float), total.shape)
        out[tech] = float(np.mean(energy[active] / total[active]))
    return out


# -- sweeps ----------------------------------------------------------------------------------

@dataclass
class SweepSpec:
    """A Cartesian grid over uncertainty parameters and the job run in every cell.

    ``beta`` and ``gamma`` set the load and tidal values together.
    ``plan`` is required for the ``audit`` job.
    """
    axes: dict
    job: str = "rpm"
    base: UncertaintyConfig = UncertaintyConfig()
    plan: InvestmentPlan | None = None
    method: str = "dual"
    eps: float = 1e-4
    max_iter: int = 50

    def problems(self) -> list[str]:
        errs = []
        if self.job not in JOBS:
            errs.append(f"job must be one of {JOBS} (got {self.job!r})")
        if self.job == "audit" and self.plan is None:
            errs.append("the audit job needs a plan")
        for name, values in self.axes.items():
            if name not in SWEEP_AXES:
                errs.append(f"unknown sweep axis {name!r}; expected one of {SWEEP_AXES}")
            elif len(values) == 0:
                errs.append(f"sweep axis {name!r} has no values")
            elif not all(np.isfinite(float(v)) for v in values):
                errs.append(f"sweep axis {name!r} has non-finite values")
        return errs

    def cells(self) -> list[dict]:
        names = list(self.axes)
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.axes[n] for n in names))]


def cell_config(base: UncertaintyConfig, params: dict) -> UncertaintyConfig:
    changes = {}
    for name, value in params.items():
        if name == "beta":
            changes.update(beta_load=float(value), beta_tpg=float(value))
        elif name == "gamma":
            changes.update(gamma_load=float(value), gamma_tpg=float(value))
        elif name == "delta_t":
            changes["delta_t"] = int(value)
        else:
            changes[name] = float(value)
    return base.replace(**changes)


def _built(plan: InvestmentPlan) -> str:
    return " ".join(k for k, v in plan.build.items() if v)


def run_cell(inst: Instance, spec: SweepSpec, params: dict, options: S.SolveOptions | None = None,
             backend: str | None = None) -> dict:
    """Run one sweep cell; failures are recorded in the row instead of raised."""
    row = dict(params)
    t0 = time.perf_counter()
    try:
        uc = cell_config(spec.base, params)
        if spec.job == "dpm":
            res = solve_dpm(inst, uc.delta_t, options, backend)
            plan, sched, cinv, cope = res.plan, res.schedule, res.cost_inv, res.cost_ope
            status, iterations = res.outcome.status, 1
        elif spec.job == "rpm":
            res = ccg_solve(inst, uc, eps=spec.eps, max_iter=spec.max_iter, method=spec.method,
                            options=options, backend=backend)
            plan, sched, cinv, cope = res.plan, res.schedule, res.cost_inv, res.cost_ope
            status, iterations = res.status, res.state.iteration
        else:
            plan = spec.plan
            wc = audit(inst, plan, uc, spec.method, options, backend)
            sched, cope = wc.schedule, wc.cost
            cinv = investment_cost(inst.catalog, plan, inst.grid, inst.econ)
            status, iterations = "optimal", 1
        row.update(status=status, cost_total=cinv + cope, cost_inv=cinv, cost_ope=cope,
                   load_shed=sched.total_shed, water_shortfall=float(np.sum(sched.water_shortfall)),
                   iterations=iterations, plan=_built(plan))
        row.update({f"share_{k}": v for k, v in generation_percentages(sched, inst.catalog).items()})
        row["error"] = ""
    except Exception as exc:  # one bad cell must not stop the sweep
        log.warning("sweep cell %s failed: %s", params, exc)
        row.update(status="error", error=f"{type(exc).__name__}: {exc}")
    row["wall_time"] = time.perf_counter() - t0
    return row


def _run_cell_args(args):
    return run_cell(*args)


def sweep(inst: Instance, spec: SweepSpec, options: S.SolveOptions | None = None,
          backend: str | None = None, workers: int = 1) -> list[dict]:
    """Run ``spec.job`` on every cell; rows come back in grid order."""
    errs = spec.problems()
    if errs:
        raise ValidationError(errs)
    cells = spec.cells()
    args = [(inst, spec, params, options, backend) for params in cells]
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_run_cell_args, args))
    return [run_cell(*a) for a in args]


SWEEP_COLUMNS = ("status", "cost_total", "cost_inv", "cost_ope", "load_shed", "water_shortfall",
                 "iterations", "plan")


def sweep_columns(rows: list[dict], axes) -> list[str]:
    """Column order for the tidy table: axes, fixed metrics, shares, then error and time."""
    shares = sorted({k for r in rows for k in r if k.startswith("share_")})
    return list(axes) + list(SWEEP_COLUMNS) + shares + ["error", "wall_time"]
