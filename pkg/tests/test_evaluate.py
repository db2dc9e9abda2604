from functools import lru_cache

import numpy as np
import pytest

from omplan import solver as S
from omplan.core import InvestmentPlan, OperationSchedule, ValidationError
from omplan.dpm import solve_dpm
from omplan.evaluate import (SweepSpec, cell_config, dispatch, generation_percentages, run_cell, sweep,
                             sweep_columns)
from omplan.fixtures import reference_instance
from omplan.rpm import ccg_solve, worst_case
from omplan.uncertainty import Realization, UncertaintyConfig
from toys import make_toy

TIGHT = S.SolveOptions(rel_gap=1e-9)


@lru_cache(maxsize=None)
def _fixture():
    return reference_instance(6)


def test_generous_plan_sheds_nothing():
    inst = _fixture()
    sched = dispatch(inst, InvestmentPlan.all_built(inst.catalog), options=TIGHT)
    assert sched.total_shed == pytest.approx(0.0, abs=1e-9)
    assert float(sched.water_shortfall.sum()) == pytest.approx(0.0, abs=1e-9)


def test_empty_plan_sheds_everything():
    inst = _fixture()
    sched = dispatch(inst, InvestmentPlan.empty(inst.catalog), options=TIGHT)
    assert sched.total_shed == pytest.approx(float(inst.forecasts.load.sum()), rel=1e-9)
    demand = inst.catalog.desalination.daily_demand
    assert np.allclose(sched.water_shortfall, demand)


def test_zero_beta_worst_case_is_nominal():
    inst = _fixture()
    plan = solve_dpm(inst, options=TIGHT).plan
    nominal = dispatch(inst, plan, options=TIGHT)
    wc = worst_case(inst, plan, UncertaintyConfig(0.0, 0.0, 0.5, 0.5), "dual", TIGHT)
    assert wc.schedule.total_shed == pytest.approx(nominal.total_shed, abs=1e-9)
    assert wc.cost == pytest.approx(nominal.cost_ope, rel=1e-9)


def test_dispatch_under_given_realization():
    inst, uc = make_toy(4)
    plan = InvestmentPlan.all_built(inst.catalog)
    real = Realization.zeros(inst.grid, len(inst.catalog.tidal))
    real.load_up[0, 0, 0] = 1
    sched = dispatch(inst, plan, real, uc, TIGHT)
    assert sched.load[0, 0, 0] == pytest.approx(inst.forecasts.load[0, 0, 0] * (1 + uc.beta_load))


class TestShares:
    def test_fixture_shares_sum_to_one(self):
        inst = _fixture()
        res = solve_dpm(inst, options=TIGHT)
        shares = generation_percentages(res.schedule, inst.catalog)
        assert set(shares) == {"dispatchable", "wind", "solar", "tidal"}
        assert sum(shares.values()) == pytest.approx(1.0, rel=1e-12)
        assert all(0 <= v <= 1 for v in shares.values())

    def test_nothing_generating(self):
        inst = _fixture()
        shares = generation_percentages(OperationSchedule.zeros(inst.catalog, inst.grid), inst.catalog)
        assert all(v == 0.0 for v in shares.values())

    def test_single_technology(self):
        inst = _fixture()
        s = OperationSchedule.zeros(inst.catalog, inst.grid)
        s.gen["TPG1"][:] = 1.0
        s.gen["TPG3"][2] = 4.0
        assert generation_percentages(s, inst.catalog)["tidal"] == 1.0


class TestSweep:
    def test_single_cell_equals_direct_run(self):
        inst, uc = make_toy(6)
        spec = SweepSpec({"gamma_load": [uc.gamma_load]}, base=uc, eps=1e-9)
        rows = sweep(inst, spec, TIGHT)
        direct = ccg_solve(inst, uc, eps=1e-9, options=TIGHT)
        assert len(rows) == 1
        assert rows[0]["cost_total"] == pytest.approx(direct.cost_total, rel=1e-9)
        assert rows[0]["error"] == ""

    def test_failing_cell_is_recorded(self):
        inst, uc = make_toy(6)
        spec = SweepSpec({"delta_t": [0, 9]}, job="dpm", base=uc)
        rows = sweep(inst, spec, TIGHT)
        assert [r["status"] for r in rows][1] == "error"
        assert "delta_t" in rows[1]["error"]
        assert rows[0]["error"] == ""

    def test_bad_spec_rejected(self):
        inst, _ = make_toy(0)
        with pytest.raises(ValidationError):
            sweep(inst, SweepSpec({"alpha": [1]}, job="dpm"))
        with pytest.raises(ValidationError):
            sweep(inst, SweepSpec({"beta": [0.1]}, job="audit"))

    def test_shared_axes_set_both_sources(self):
        uc = cell_config(UncertaintyConfig(), {"beta": 0.3, "gamma": 0.2, "delta_t": 2.0})
        assert (uc.beta_load, uc.beta_tpg, uc.gamma_load, uc.gamma_tpg, uc.delta_t) == (0.3, 0.3, 0.2, 0.2, 2)

    def test_parallel_rows_keep_grid_order(self):
        inst, uc = make_toy(3)
        spec = SweepSpec({"beta": [0.0, 0.4], "gamma": [0.0, 0.5]}, job="audit", base=uc,
                         plan=InvestmentPlan.all_built(inst.catalog))
        serial = sweep(inst, spec, TIGHT)
        parallel = sweep(inst, spec, TIGHT, workers=2)
        assert [(r["beta"], r["gamma"]) for r in parallel] == [(0.0, 0.0), (0.0, 0.5), (0.4, 0.0), (0.4, 0.5)]
        for a, b in zip(serial, parallel):
            assert a["cost_total"] == pytest.approx(b["cost_total"], rel=1e-12)
        cols = sweep_columns(serial, spec.axes)
        assert cols[:2] == ["beta", "gamma"] and cols[-2:] == ["error", "wall_time"]

    def test_tidal_delay_moves_generation_mix(self):
        inst = reference_instance(24)
        rows = sweep(inst, SweepSpec({"delta_t": [-3, 0, 3]}, job="dpm"), TIGHT)
        assert all(r["error"] == "" for r in rows)
        tidal = [r["share_tidal"] for r in rows]
        assert len({round(t, 6) for t in tidal}) > 1
        for r in rows:
            assert sum(v for k, v in r.items() if k.startswith("share_")) == pytest.approx(1.0)

    def test_audit_row_matches_worst_case(self):
        inst, uc = make_toy(1)
        plan = InvestmentPlan.all_built(inst.catalog)
        spec = SweepSpec({"gamma": [uc.gamma_load]}, job="audit", base=uc, plan=plan)
        row = run_cell(inst, spec, {"gamma": uc.gamma_load}, TIGHT)
        wc = worst_case(inst, plan, cell_config(uc, {"gamma": uc.gamma_load}), "dual", TIGHT)
        assert row["cost_ope"] == pytest.approx(wc.cost, rel=1e-9)
