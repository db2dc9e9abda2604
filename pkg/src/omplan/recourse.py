"""Hourly operation constraints shared by every planner.

One *operation block* is a full copy of the dispatch variables and
constraints for a given load and tidal availability. Build decisions enter
either as fixed numbers (dispatch LP, worst-case subproblem) or as binary
model variables (deterministic model, robust master copies).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import solver as S
from .core import Instance, InvestmentPlan, OperationSchedule, investment_cost
from .tidal import nominal_tpg_profile
from .uncertainty import Realization, UncertaintyConfig, realize_load, realize_tpg


@dataclass
class ScenarioData:
    load: np.ndarray  # (H, D, Y) realized load, MW
    tpg: np.ndarray  # (K, H, D, Y) realized tidal availability, MW
    nominal_tpg: np.ndarray  # (K, H, D, Y) availability before deviations


def nominal_tpg(inst: Instance, delta_t: int = 0) -> np.ndarray:
    return nominal_tpg_profile(inst.forecasts, inst.catalog.tidal, delta_t, inst.econ,
                               cap=inst.cap_tidal)


def scenario_data(inst: Instance, uconfig: UncertaintyConfig | None = None,
                  realization: Realization | None = None) -> ScenarioData:
    uconfig = uconfig or UncertaintyConfig()
    nom = nominal_tpg(inst, uconfig.delta_t)
    if realization is None:
        return ScenarioData(np.array(inst.forecasts.load, dtype=float), nom.copy(), nom)
    return ScenarioData(realize_load(inst.forecasts.load, uconfig, realization),
                        realize_tpg(nom, uconfig, realization), nom)


def value_bound(inst: Instance) -> float:
    """Upper bound on the marginal cost ($/MW) of one slot's power balance.

    One extra MW in a slot can at most avoid shedding (``nu``), replace the
    priciest unit, or let the desalination unit cover water that would
    otherwise be charged at the shortfall penalty. Storage only moves power
    within a day with losses, so it cannot raise the bound. Used for the
    big-M values of the dualized recourse.
    """
    cat = inst.catalog
    sdu = cat.desalination
    costs = [u.levelized_op_cost for u in cat.dispatchable] + [u.levelized_op_cost for u in cat.tidal]
    nu = inst.econ.shed_penalty
    per_mw = max([nu, inst.water_penalty / sdu.power_per_ton, sdu.levelized_op_cost / sdu.power_per_ton]
                 + costs)
    return inst.grid.day_weight * per_mw


def _is_var(x) -> bool:
    return isinstance(x, S.Var)


@dataclass
class OpBlock:
    gen: dict  # id -> object array (H, D, Y) of Var
    ch: np.ndarray
    dch: np.ndarray
    soc: np.ndarray
    water: np.ndarray
    shed: np.ndarray
    shortfall: np.ndarray | None  # (D, Y) or None when water demand is hard
    balance: np.ndarray  # (H, D, Y) Constr
    tpg_rows: dict  # (k, h, d, y) -> Constr
    cost: S.LinExpr


def add_operation_block(m: S.Model, inst: Instance, x, load, tpg_avail, *,
                        water_slack: bool = True, tag: str = "") -> OpBlock:
    """Add one copy of the hourly operation problem to ``m``.

    ``x`` maps device id to a 0/1 number or a binary :class:`~omplan.solver.Var`.
    Returns handles to the block's variables, its parametric rows and its
    (day-weighted) operating cost expression.
    """
    cat, grid, econ = inst.catalog, inst.grid, inst.econ
    H, D, Y = grid.shape
    sdu = cat.desalination
    w = grid.day_weight
    load = np.asarray(load, dtype=float)
    tpg_avail = np.asarray(tpg_avail, dtype=float)
    sfx = f"_{tag}" if tag else ""
    cost = S.LinExpr()

    def capped(name, coef, xv, ub_extra=None):
        """Variable with ``0 <= v <= coef * x`` (and ``<= ub_extra`` if given)."""
        if _is_var(xv):
            ub = coef if ub_extra is None else min(coef, ub_extra)
            v = m.add_var(name, 0.0, ub)
            if ub > 0:
                m.add_constr(v - coef * xv, "<=", 0.0, name=f"lnk_{name}")
            return v
        ub = coef * xv if ub_extra is None else min(coef * xv, ub_extra)
        return m.add_var(name, 0.0, ub)

    gen = {}
    slots = list(grid.slots())
    for u in cat.dispatchable:
        arr = np.empty((H, D, Y), dtype=object)
        for h, d, y in slots:
            arr[h, d, y] = v = capped(f"p_{u.id}_{h}_{d}_{y}{sfx}", u.rated_power, x[u.id])
            cost.add_term(v, w * u.levelized_op_cost)
        gen[u.id] = arr
    for j, u in enumerate(cat.renewable):
        avail = inst.forecasts.ndu_availability[j]
        arr = np.empty((H, D, Y), dtype=object)
        for h, d, y in slots:
            coef = u.rated_power if inst.ndu_mode == "rated" else float(avail[h, d, y])
            arr[h, d, y] = capped(f"p_{u.id}_{h}_{d}_{y}{sfx}", coef, x[u.id])
        gen[u.id] = arr
    tpg_rows = {}
    for k, u in enumerate(cat.tidal):
        arr = np.empty((H, D, Y), dtype=object)
        built = x[u.id]
        for h, d, y in slots:
            v = capped(f"p_{u.id}_{h}_{d}_{y}{sfx}", u.rated_power, built)
            arr[h, d, y] = v
            cost.add_term(v, w * u.levelized_op_cost)
            avail = float(tpg_avail[k, h, d, y])
            nm = f"tpg_{u.id}_{h}_{d}_{y}{sfx}"
            if _is_var(built):
                tpg_rows[k, h, d, y] = m.add_constr(v - avail * built, "<=", 0.0, name=nm)
            elif built:
                tpg_rows[k, h, d, y] = m.add_constr(v, "<=", avail, name=nm)
        gen[u.id] = arr

    n_l = len(cat.storage)
    ch = np.empty((n_l, H, D, Y), dtype=object)
    dch = np.empty_like(ch)
    soc = np.empty_like(ch)
    for l, u in enumerate(cat.storage):
        for h, d, y in slots:
            ch[l, h, d, y] = capped(f"ch_{u.id}_{h}_{d}_{y}{sfx}", u.rated_power, x[u.id])
            dch[l, h, d, y] = capped(f"dch_{u.id}_{h}_{d}_{y}{sfx}", u.rated_power, x[u.id])
            soc[l, h, d, y] = capped(f"soc_{u.id}_{h}_{d}_{y}{sfx}", u.rated_energy, x[u.id])
        eta = u.efficiency
        for h, d, y in slots:
            nxt = soc[l, (h + 1) % H, d, y]
            # state after hour H is the state at the start of hour 1 (cyclic day)
            m.add_constr(nxt - soc[l, h, d, y] - eta * ch[l, h, d, y] + (1.0 / eta) * dch[l, h, d, y],
                         "==", 0.0, name=f"socdyn_{u.id}_{h}_{d}_{y}{sfx}")

    water = np.empty((H, D, Y), dtype=object)
    shed = np.empty((H, D, Y), dtype=object)
    balance = np.empty((H, D, Y), dtype=object)
    for h, d, y in slots:
        water[h, d, y] = f = m.add_var(f"F_{h}_{d}_{y}{sfx}", 0.0, sdu.rated_capacity)
        shed[h, d, y] = ls = m.add_var(f"LS_{h}_{d}_{y}{sfx}", 0.0, float(load[h, d, y]))
        cost.add_term(f, w * sdu.levelized_op_cost)
        cost.add_term(ls, w * econ.shed_penalty)
        bal = S.LinExpr()
        for arr in gen.values():
            bal.add_term(arr[h, d, y], 1.0)
        for l in range(n_l):
            bal.add_term(dch[l, h, d, y], 1.0)
            bal.add_term(ch[l, h, d, y], -1.0)
        bal.add_term(f, -sdu.power_per_ton)
        bal.add_term(ls, 1.0)
        balance[h, d, y] = m.add_constr(bal, "==", float(load[h, d, y]), name=f"bal_{h}_{d}_{y}{sfx}")

    shortfall = None
    if water_slack:
        shortfall = np.empty((D, Y), dtype=object)
    for d in range(D):
        for y in range(Y):
            expr = S.quicksum(water[h, d, y] for h in range(H))
            if water_slack:
                shortfall[d, y] = wv = m.add_var(f"W_{d}_{y}{sfx}", 0.0)
                expr.add_term(wv, 1.0)
                cost.add_term(wv, w * inst.water_penalty)
            m.add_constr(expr, ">=", sdu.daily_demand, name=f"water_{d}_{y}{sfx}")

    return OpBlock(gen, ch, dch, soc, water, shed, shortfall, balance, tpg_rows, cost)


def add_adequacy(m: S.Model, inst: Instance, xvars: dict, name: str = "adequacy"):
    """Installed DU + NDU + TPG rated power must cover the peak forecast load."""
    expr = S.quicksum(u.rated_power * xvars[u.id] for u in inst.catalog.generators)
    return m.add_constr(expr, ">=", inst.peak_load, name=name)


def investment_expr(inst: Instance, xvars: dict) -> S.LinExpr:
    """Discounted investment cost as a linear expression (SDU constant included)."""
    from .core import annual_capital_cost, discount_sum

    k = discount_sum(inst.grid, inst.econ)
    expr = S.quicksum(k * annual_capital_cost(inst.catalog, dev) * xvars[dev.id]
                      for dev in inst.catalog.devices())
    expr += k * inst.catalog.desalination.annualized_inv_cost
    return expr


def add_build_vars(m: S.Model, inst: Instance) -> dict:
    return {dev.id: m.add_var(f"x_{dev.id}", binary=True) for dev in inst.catalog.devices()}


def extract_schedule(out: S.SolveOutcome, block: OpBlock, inst: Instance, load,
                     plan: InvestmentPlan | None = None) -> OperationSchedule:
    vals = out.values

    def grab(arr):
        if arr is None:
            return None
        idx = np.vectorize(lambda v: v.index, otypes=[np.int64])(arr) if arr.size else np.zeros(arr.shape, int)
        return vals[idx] if arr.size else np.zeros(arr.shape)

    shp = inst.grid.shape
    sched = OperationSchedule(
        gen={k: grab(v) for k, v in block.gen.items()},
        ess_charge=grab(block.ch),
        ess_discharge=grab(block.dch),
        soc=grab(block.soc),
        water=grab(block.water),
        shed=grab(block.shed),
        water_shortfall=grab(block.shortfall) if block.shortfall is not None else np.zeros(shp[1:]),
        load=np.array(load, dtype=float),
    )
    sched.cost_ope = block.cost.value(vals)
    if plan is not None:
        sched.cost_inv = investment_cost(inst.catalog, plan, inst.grid, inst.econ)
    return sched


class DispatchLP:
    """The recourse LP for a fixed plan, re-solvable for new scenarios.

    Only the right-hand sides that depend on the realization change between
    solves: the power balance, the shedding bound and the tidal availability
    rows of built tidal units.
    """

    def __init__(self, inst: Instance, plan: InvestmentPlan, scen: ScenarioData, *,
                 water_slack: bool = True):
        plan.check(inst.catalog)
        self.inst = inst
        self.plan = plan
        self.model = S.Model("dispatch")
        self.block = add_operation_block(self.model, inst, plan.build, scen.load, scen.tpg,
                                         water_slack=water_slack)
        self.model.set_objective(self.block.cost, "min")
        self.load = np.array(scen.load, dtype=float)

    def set_scenario(self, load, tpg):
        m, b = self.model, self.block
        load = np.asarray(load, dtype=float)
        for (h, d, y), con in np.ndenumerate(b.balance):
            m.set_rhs(con, load[h, d, y])
            m.set_bounds(b.shed[h, d, y], ub=load[h, d, y])
        for (k, h, d, y), con in b.tpg_rows.items():
            m.set_rhs(con, float(tpg[k, h, d, y]))
        self.load = load

    def solve(self, options=None, backend=None) -> S.SolveOutcome:
        out = S.solve(self.model, options, backend)
        if not out.ok:
            raise S.SolverError(f"dispatch LP not solved: {out.status} ({out.message})")
        return out

    def schedule(self, out: S.SolveOutcome) -> OperationSchedule:
        return extract_schedule(out, self.block, self.inst, self.load, self.plan)
