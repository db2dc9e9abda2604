"""Two-stage robust planning solved by column-and-constraint generation.

The master problem chooses build flags and carries one full copy of the
hourly operation problem for every realization found so far. The
subproblem finds, for fixed build flags, the budget-feasible realization
with the highest operating cost. It does so either by dualizing the
recourse LP into a single MILP (``method="dual"``) or by solving the
recourse LP for every realization (``method="enumerate"``, small grids only).
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import solver as S
from .core import Instance, InvestmentPlan, OperationSchedule, ValidationError, investment_cost
from .dpm import PlanningError, _precheck
from .recourse import (DispatchLP, ScenarioData, add_adequacy, add_build_vars, add_operation_block,
                       investment_expr, scenario_data, value_bound)
from .uncertainty import (DEFAULT_ENUM_CAP, Realization, UncertaintyConfig, enumerate_realizations)

log = logging.getLogger(__name__)

METHODS = ("dual", "enumerate")


def _method(name: str) -> str:
    aliases = {"dual": "dual", "dual_milp": "dual", "enum": "enumerate", "enumerate": "enumerate"}
    try:
        return aliases[name]
    except KeyError:
        raise ValueError(f"unknown worst-case method {name!r}; use 'dual' or 'enumerate'") from None


# -- master ------------------------------------------------------------------------

def master_solve(inst: Instance, uconfig: UncertaintyConfig, pool, options=None, backend=None):
    """Solve the master over the pooled realizations.

    Returns ``(plan, lower_bound, outcome)``. With an empty pool this is the
    cheapest build set that satisfies capacity adequacy.

    The epigraph variable holds the operating cost of one day (dollars
    divided by the day weight); with the weight folded into every recourse
    row the coefficients reach ``day_weight * shed_penalty``, which is
    enough for HiGHS to misreport pooled masters as infeasible.
    """
    m = S.Model("ccg_master")
    x = add_build_vars(m, inst)
    if inst.enforce_adequacy:
        add_adequacy(m, inst, x)
    w = inst.grid.day_weight if inst.grid.day_weight > 0 else 1.0
    eta = m.add_var("eta", 0.0)
    for r_idx, real in enumerate(pool):
        scen = scenario_data(inst, uconfig, real)
        block = add_operation_block(m, inst, x, scen.load, scen.tpg, water_slack=True, tag=f"r{r_idx}")
        m.add_constr(eta - block.cost * (1.0 / w), ">=", 0.0, name=f"recourse_r{r_idx}")
    m.set_objective(investment_expr(inst, x) + w * eta, "min")
    out = S.solve(m, options, backend)
    if out.values is None:
        raise PlanningError(f"master problem {out.status}: {out.message}", out)
    plan = InvestmentPlan({k: int(round(out[v])) for k, v in x.items()})
    return plan, out.objective, out


# -- worst case ----------------------------------------------------------------------

@dataclass
class WorstCase:
    realization: Realization
    cost: float  # operating cost of the worst realization, re-solved as a primal LP
    schedule: OperationSchedule
    bound: float | None = None  # objective of the dual MILP when method="dual"
    evaluated: int = 0


@dataclass
class _Param:
    """A right-hand side entry that moves with one uncertainty flag."""
    kind: str  # "row" or "ub"
    index: int
    flag: tuple  # key into the flag dictionary
    coef: float


def _active_flags(inst, plan, uconfig, scen: ScenarioData):
    """Flags that can change the recourse: positive nominal value, nonzero beta and budget."""
    grid = inst.grid
    H, D, Y = grid.shape
    lb, tb = uconfig.load_budgets(grid), uconfig.tpg_budgets(grid)
    load_slots, tpg_slots = [], []
    if uconfig.beta_load > 0:
        for h, d, y in grid.slots():
            if lb[y] > 0 and scen.load[h, d, y] > 0:
                load_slots.append((h, d, y))
    if uconfig.beta_tpg > 0:
        for k, u in enumerate(inst.catalog.tidal):
            if not plan[u.id]:
                continue
            for h, d, y in grid.slots():
                if tb[y] > 0 and scen.nominal_tpg[k, h, d, y] > 0:
                    tpg_slots.append((k, h, d, y))
    return load_slots, tpg_slots


def build_worst_case_milp(inst: Instance, plan: InvestmentPlan, uconfig: UncertaintyConfig):
    """Dualize the recourse LP and linearize the flag-dual products.

    The recourse LP is ``min c'z s.t. A z (<=,>=,==) b(u), 0 <= z <= ub(u)``.
    Its dual is ``max b(u)'y + ub(u)'v s.t. A'y + v <= c``; every product of
    a dual variable with a binary flag is replaced by an auxiliary variable
    with the four McCormick inequalities (only the two that bind in the
    maximization are kept). Dual variables multiplying flags are boxed by
    :func:`~omplan.recourse.value_bound`.

    Costs are divided by the day weight to keep the coefficients near unit
    scale; multiply the model objective by ``model.objective_scale`` to get
    dollars.

    Returns ``(model, flags, dispatch_lp)`` where ``flags`` maps
    ``("load_up", h, d, y)`` / ``("tpg_down", k, h, d, y)`` etc. to binaries.
    """
    scen = scenario_data(inst, uconfig)
    lp = DispatchLP(inst, plan, scen)
    c, c0, A, senses, rhs, lb, ub, _ = lp.model.compile()
    scale = inst.grid.day_weight if inst.grid.day_weight > 0 else 1.0
    c, c0 = c / scale, c0 / scale
    if np.any(lb != 0.0):
        raise ValidationError("dualization expects zero lower bounds on the recourse LP")
    keep = ub > 0.0
    Ak = A[:, keep].tocsr()
    row_nnz = np.diff(Ak.indptr)
    rows = np.flatnonzero(row_nnz > 0)
    if np.any((row_nnz == 0) & (senses == "==") & (rhs != 0)) or \
            np.any((row_nnz == 0) & (senses == ">=") & (rhs > 0)) or \
            np.any((row_nnz == 0) & (senses == "<=") & (rhs < 0)):
        raise ValidationError("recourse LP has an infeasible empty row")

    M = value_bound(inst) / scale
    beta_l, beta_t = uconfig.beta_load, uconfig.beta_tpg
    load_slots, tpg_slots = _active_flags(inst, plan, uconfig, scen)
    params: list[_Param] = []
    for (h, d, y) in load_slots:
        nominal = scen.load[h, d, y]
        bal = lp.block.balance[h, d, y].index
        ls = lp.block.shed[h, d, y].index
        for name, sgn in (("load_up", 1.0), ("load_down", -1.0)):
            params.append(_Param("row", bal, (name, h, d, y), sgn * beta_l * nominal))
            params.append(_Param("ub", ls, (name, h, d, y), sgn * beta_l * nominal))
    for (k, h, d, y) in tpg_slots:
        nominal = scen.nominal_tpg[k, h, d, y]
        row = lp.block.tpg_rows[k, h, d, y].index
        for name, sgn in (("tpg_up", 1.0), ("tpg_down", -1.0)):
            params.append(_Param("row", row, (name, k, h, d, y), sgn * beta_t * nominal))

    param_rows = {p.index for p in params if p.kind == "row"}
    param_ubs = {p.index for p in params if p.kind == "ub"}

    dm = S.Model("worst_case_dual", sense="max")
    obj = S.LinExpr(constant=c0)
    ydual = {}
    for i in rows:
        s = senses[i]
        lo = -S.INF if s in ("<=", "==") else 0.0
        hi = S.INF if s in (">=", "==") else 0.0
        if i in param_rows:
            lo, hi = max(lo, -M), min(hi, M)
        ydual[i] = v = dm.add_var(f"y_{lp.model.constr_names[i]}", lo, hi)
        obj.add_term(v, rhs[i])
    vdual = {}
    for j in np.flatnonzero(keep & np.isfinite(ub)):
        lo = -M if j in param_ubs else -S.INF
        vdual[j] = v = dm.add_var(f"v_{lp.model.var_names[j]}", lo, 0.0)
        obj.add_term(v, ub[j])

    # dual feasibility: one row per kept primal column
    Akc = Ak[rows].tocsc()
    for jj, j in enumerate(np.flatnonzero(keep)):
        expr = S.LinExpr()
        start, end = Akc.indptr[jj], Akc.indptr[jj + 1]
        for r, a in zip(Akc.indices[start:end], Akc.data[start:end]):
            expr.add_term(ydual[rows[r]], a)
        if j in vdual:
            expr.add_term(vdual[j], 1.0)
        dm.add_constr(expr, "<=", c[j], name=f"dfeas_{lp.model.var_names[j]}")

    flags = {}
    for p in params:
        if p.flag not in flags:
            flags[p.flag] = dm.add_var("u_" + "_".join(map(str, p.flag)), binary=True)
    for n, p in enumerate(params):
        z = ydual[p.index] if p.kind == "row" else vdual[p.index]
        u = flags[p.flag]
        zlo, zhi = z.lb, z.ub
        wv = dm.add_var(f"w{n}", zlo if zlo < 0 else 0.0, zhi if zhi > 0 else 0.0)
        if p.coef > 0:
            dm.add_constr(wv - zhi * u, "<=", 0.0, name=f"mc{n}a")
            dm.add_constr(wv - z - zlo * u, "<=", -zlo, name=f"mc{n}b")
        else:
            dm.add_constr(wv - zlo * u, ">=", 0.0, name=f"mc{n}a")
            dm.add_constr(wv - z - zhi * u, ">=", -zhi, name=f"mc{n}b")
        obj.add_term(wv, p.coef)

    # uncertainty set: one direction per slot, per-year budgets
    grid = inst.grid
    lbud, tbud = uconfig.load_budgets(grid), uconfig.tpg_budgets(grid)
    for (h, d, y) in load_slots:
        dm.add_constr(flags["load_up", h, d, y] + flags["load_down", h, d, y], "<=", 1.0,
                      name=f"onedir_L_{h}_{d}_{y}")
    for (k, h, d, y) in tpg_slots:
        dm.add_constr(flags["tpg_up", k, h, d, y] + flags["tpg_down", k, h, d, y], "<=", 1.0,
                      name=f"onedir_T_{k}_{h}_{d}_{y}")
    for y in range(grid.years):
        terms = [flags[n, h, d, yy] for (h, d, yy) in load_slots if yy == y
                 for n in ("load_up", "load_down")]
        if terms:
            dm.add_constr(S.quicksum(terms), "<=", lbud[y], name=f"budget_L_{y}")
        groups = [None] if uconfig.tpg_budget == "shared" else range(len(inst.catalog.tidal))
        for g in groups:
            terms = [flags[n, k, h, d, yy] for (k, h, d, yy) in tpg_slots
                     if yy == y and (g is None or k == g) for n in ("tpg_up", "tpg_down")]
            if terms:
                dm.add_constr(S.quicksum(terms), "<=", tbud[y], name=f"budget_T_{y}_{g}")
    dm.set_objective(obj, "max")
    dm.objective_scale = scale
    return dm, flags, lp


def _realization_from_flags(inst, flags, values) -> Realization:
    r = Realization.zeros(inst.grid, len(inst.catalog.tidal))
    for key, var in flags.items():
        if values[var.index] > 0.5:
            getattr(r, key[0])[key[1:]] = 1
    return r


def _solve_scenario(lp: DispatchLP, inst, uconfig, real, options, backend):
    scen = scenario_data(inst, uconfig, real)
    lp.set_scenario(scen.load, scen.tpg)
    return lp.solve(options, backend)


def _enum_chunk(args):
    inst, plan, uconfig, reals, options, backend = args
    lp = DispatchLP(inst, plan, scenario_data(inst, uconfig))
    best, best_i = -math.inf, -1
    for i, real in enumerate(reals):
        val = _solve_scenario(lp, inst, uconfig, real, options, backend).objective
        if val > best:
            best, best_i = val, i
    return best, best_i


def enumeration_space(inst: Instance, plan: InvestmentPlan, uconfig: UncertaintyConfig, cap: int):
    """Realizations the enumeration oracle visits for ``plan``.

    Tidal flags of units that are not built cannot change the recourse, so
    only built units deviate; a zero ``beta`` freezes the corresponding set.
    """
    grid = inst.grid
    built = [k for k, u in enumerate(inst.catalog.tidal) if plan[u.id]]
    return enumerate_realizations(
        grid, len(inst.catalog.tidal), uconfig.load_budgets(grid), uconfig.tpg_budgets(grid),
        tpg_budget=uconfig.tpg_budget,
        tpg_units=built if uconfig.beta_tpg > 0 else (),
        include_load=uconfig.beta_load > 0, cap=cap)


def worst_case(inst: Instance, plan: InvestmentPlan, uconfig: UncertaintyConfig, method: str = "dual",
               options: S.SolveOptions | None = None, backend: str | None = None, *,
               workers: int = 1, enum_cap: int = DEFAULT_ENUM_CAP) -> WorstCase:
    """Worst-case realization and its operating cost for a fixed plan."""
    plan.check(inst.catalog)
    method = _method(method)
    if method == "dual":
        dm, flags, lp = build_worst_case_milp(inst, plan, uconfig)
        out = S.solve(dm, options, backend)
        if out.values is None:
            raise PlanningError(f"worst-case MILP {out.status}: {out.message}", out)
        if not out.ok:
            log.warning("worst-case MILP stopped with status %s; using incumbent", out.status)
        real = _realization_from_flags(inst, flags, out.values)
        final = _solve_scenario(lp, inst, uconfig, real, options, backend)
        bound = out.objective * dm.objective_scale
        if abs(final.objective - bound) > 1e-6 * max(1.0, abs(final.objective)):
            log.debug("dual MILP objective %.10g vs primal re-solve %.10g", bound, final.objective)
        return WorstCase(real, final.objective, lp.schedule(final), bound=bound, evaluated=1)

    reals = list(enumeration_space(inst, plan, uconfig, enum_cap))
    if workers > 1 and len(reals) > 1:
        size = math.ceil(len(reals) / workers)
        chunks = [reals[i:i + size] for i in range(0, len(reals), size)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_enum_chunk, [(inst, plan, uconfig, ch, options, backend)
                                                for ch in chunks]))
        best, best_i = -math.inf, -1
        offset = 0
        for ch, (val, i) in zip(chunks, results):
            if val > best:
                best, best_i = val, offset + i
            offset += len(ch)
    else:
        best, best_i = _enum_chunk((inst, plan, uconfig, reals, options, backend))
    lp = DispatchLP(inst, plan, scenario_data(inst, uconfig))
    final = _solve_scenario(lp, inst, uconfig, reals[best_i], options, backend)
    return WorstCase(reals[best_i], final.objective, lp.schedule(final), evaluated=len(reals))


# -- C&CG ----------------------------------------------------------------------------

@dataclass
class CcgState:
    iteration: int = 0
    lb: float = -math.inf
    ub: float = math.inf
    pool: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    @property
    def gap(self) -> float:
        if not math.isfinite(self.ub) or not math.isfinite(self.lb):
            return math.inf
        return (self.ub - self.lb) / max(abs(self.ub), 1e-9)


@dataclass
class CcgResult:
    plan: InvestmentPlan
    state: CcgState
    worst: Realization
    schedule: OperationSchedule
    cost_inv: float
    cost_ope: float
    status: str  # converged | max_iter | stalled
    wall_time: float = 0.0

    @property
    def cost_total(self) -> float:
        return self.cost_inv + self.cost_ope

    @property
    def converged(self) -> bool:
        return self.status in ("converged", "stalled")

    @property
    def water_shortfall(self) -> float:
        return float(self.schedule.water_shortfall.sum())


def ccg_solve(inst: Instance, uconfig: UncertaintyConfig, *, eps: float = 1e-4, max_iter: int = 50,
              method: str = "dual", options: S.SolveOptions | None = None, backend: str | None = None,
              workers: int = 1, enum_cap: int = DEFAULT_ENUM_CAP) -> CcgResult:
    """Column-and-constraint generation for the robust plan.

    Stops when the relative gap ``(UB - LB) / |UB|`` reaches ``eps``, when
    the subproblem returns a realization that is already pooled (the gap is
    then closed up to solver tolerance), or after ``max_iter`` masters.
    """
    _precheck(inst)
    t0 = time.perf_counter()
    state = CcgState()
    keys = set()
    best = None
    status = "max_iter"
    for it in range(1, max_iter + 1):
        plan, master_obj, _ = master_solve(inst, uconfig, state.pool, options, backend)
        state.iteration = it
        state.lb = max(state.lb, master_obj)
        wc = worst_case(inst, plan, uconfig, method, options, backend, workers=workers, enum_cap=enum_cap)
        cinv = investment_cost(inst.catalog, plan, inst.grid, inst.econ)
        candidate = cinv + wc.cost
        if candidate < state.ub:
            state.ub = candidate
            best = (plan, wc, cinv)
        state.trace.append({
            "iteration": it, "lower_bound": state.lb, "upper_bound": state.ub, "gap": state.gap,
            "master_objective": master_obj, "candidate_cost": candidate,
            "worst_operation_cost": wc.cost, "scenarios": len(state.pool),
        })
        log.info("C&CG it %d: LB=%.6f UB=%.6f gap=%.3e", it, state.lb, state.ub, state.gap)
        if state.gap <= eps:
            status = "converged"
            break
        key = wc.realization.key()
        if key in keys:
            status = "stalled"
            log.warning("worst case already pooled at iteration %d (gap %.3e)", it, state.gap)
            break
        keys.add(key)
        state.pool.append(wc.realization)
    plan, wc, cinv = best
    res = CcgResult(plan, state, wc.realization, wc.schedule, cinv, wc.cost, status,
                    time.perf_counter() - t0)
    if res.water_shortfall > 1e-6:
        log.warning("robust plan leaves %.3f t of fresh-water demand unmet in the worst case",
                    res.water_shortfall)
    return res


# -- exhaustive oracle -----------------------------------------------------------------

def robust_brute_force(inst: Instance, uconfig: UncertaintyConfig, options=None, backend=None, *,
                       enum_cap: int = DEFAULT_ENUM_CAP):
    """Minimum of ``C_inv(x) + max_u Q(x, u)`` over every build vector (tiny catalogs only).

    Returns ``(plan, total_cost)``. Plans violating capacity adequacy are
    skipped when the instance enforces it.
    """
    cat = inst.catalog
    best_plan, best = None, math.inf
    for flags in itertools.product((0, 1), repeat=len(cat.ids)):
        plan = InvestmentPlan.from_flags(cat, flags)
        if inst.enforce_adequacy and plan.installed(cat.generators) < inst.peak_load:
            continue
        wc = worst_case(inst, plan, uconfig, "enumerate", options, backend, enum_cap=enum_cap)
        total = investment_cost(cat, plan, inst.grid, inst.econ) + wc.cost
        if total < best:
            best_plan, best = plan, total
    if best_plan is None:
        raise PlanningError("no build vector satisfies capacity adequacy")
    return best_plan, best
