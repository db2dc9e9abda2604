import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omplan.core import (DesalinationUnit, DeviceCatalog, DispatchableUnit, EconomicParams, ForecastSet,
                         Instance, InvestmentPlan, OperationSchedule, RenewableUnit, StorageUnit, TidalUnit,
                         TimeGrid, ValidationError, investment_cost, operation_cost, present_worth_factor)
from omplan.fixtures import DU_TABLE, ESS_TABLE
from omplan.verify import verify_schedule

FREE_SDU = DesalinationUnit(10.0, 0.0, 1.0, 0.05, 0.0)


class TestPresentWorth:
    def test_first_year_is_one(self):
        assert present_worth_factor(0.1, 1) == 1.0

    def test_zero_rate(self):
        assert present_worth_factor(0.0, 20) == 1.0

    def test_third_year(self):
        assert present_worth_factor(0.1, 3) == pytest.approx(1 / 1.21, rel=1e-12)
        assert present_worth_factor(0.1, 3) == pytest.approx(0.826446, abs=1e-6)

    @given(st.floats(0.001, 0.5), st.integers(1, 40))
    def test_strictly_decreasing(self, dr, y):
        assert present_worth_factor(dr, y + 1) < present_worth_factor(dr, y)

    def test_bad_year(self):
        with pytest.raises(ValueError):
            present_worth_factor(0.05, 0)


def test_investment_single_du():
    i, p, c, cc = DU_TABLE[0]
    cat = DeviceCatalog(dispatchable=[DispatchableUnit(i, p, c, cc)], desalination=FREE_SDU)
    plan = InvestmentPlan({i: 1})
    assert investment_cost(cat, plan, TimeGrid(years=1), EconomicParams(discount_rate=0.0)) == 264_000


def test_investment_empty_plan():
    cat = DeviceCatalog(dispatchable=[DispatchableUnit("DU1", 6, 140, 44_000)], desalination=FREE_SDU)
    assert investment_cost(cat, InvestmentPlan.empty(cat), TimeGrid(), EconomicParams(0.0)) == 0.0


def test_investment_single_ess():
    i, p, e, cp, ce = ESS_TABLE[1]
    cat = DeviceCatalog(storage=[StorageUnit(i, p, e, cp, ce)], desalination=FREE_SDU)
    assert investment_cost(cat, InvestmentPlan({i: 1}), TimeGrid(), EconomicParams(0.0)) == 240_000


def test_investment_sdu_constant_is_discounted():
    sdu = DesalinationUnit(10.0, 1000.0, 1.0, 0.05, 0.0)
    cat = DeviceCatalog(desalination=sdu)
    cost = investment_cost(cat, InvestmentPlan({}), TimeGrid(years=3), EconomicParams(0.1))
    assert cost == pytest.approx(1000.0 * (1 + 1 / 1.1 + 1 / 1.21))
    assert investment_cost(cat, InvestmentPlan({}), TimeGrid(years=3), EconomicParams(0.1),
                           include_sdu=False) == 0.0


@given(st.lists(st.tuples(st.floats(0.5, 10), st.floats(1e3, 1e5), st.booleans()), min_size=1, max_size=5),
       st.integers(1, 4), st.floats(0.0, 0.2))
@settings(max_examples=50)
def test_investment_is_additive(units, years, dr):
    devs = [DispatchableUnit(f"D{i}", p, 100.0, cc) for i, (p, cc, _) in enumerate(units)]
    cat = DeviceCatalog(dispatchable=devs, desalination=FREE_SDU)
    plan = InvestmentPlan({d.id: int(b) for d, (_, _, b) in zip(devs, units)})
    grid, econ = TimeGrid(years=years), EconomicParams(dr)
    total = investment_cost(cat, plan, grid, econ)
    parts = sum(investment_cost(DeviceCatalog(dispatchable=[d], desalination=FREE_SDU),
                                InvestmentPlan({d.id: plan[d.id]}), grid, econ) for d in devs)
    assert total == pytest.approx(parts, rel=1e-12)


def _one_hour_catalog():
    return DeviceCatalog(dispatchable=[DispatchableUnit("DU1", 6, 100, 44_000)],
                         storage=[StorageUnit("ESS1", 1, 2, 1, 1, efficiency=0.9)],
                         desalination=DesalinationUnit(20.0, 0.0, 1.0, 0.05, 10.0))


class TestOperationCost:
    def test_zero_schedule(self):
        cat, grid = _one_hour_catalog(), TimeGrid(1)
        assert operation_cost(OperationSchedule.zeros(cat, grid), cat, EconomicParams(), grid) == 0.0

    def test_du_and_water(self):
        cat, grid = _one_hour_catalog(), TimeGrid(1)
        s = OperationSchedule.zeros(cat, grid)
        s.gen["DU1"][:] = 2.0
        s.water[:] = 10.0
        assert operation_cost(s, cat, EconomicParams(), grid) == pytest.approx(210.0)

    def test_shedding_penalty(self):
        cat, grid = _one_hour_catalog(), TimeGrid(1)
        s = OperationSchedule.zeros(cat, grid)
        s.shed[:] = 1.0
        assert operation_cost(s, cat, EconomicParams(shed_penalty=1e6), grid) == pytest.approx(1e6)

    def test_day_weight_scales_cost(self):
        cat, grid = _one_hour_catalog(), TimeGrid(1, day_weight=365.0)
        s = OperationSchedule.zeros(cat, grid)
        s.gen["DU1"][:] = 1.0
        assert operation_cost(s, cat, EconomicParams(), grid) == pytest.approx(36_500.0)

    @pytest.mark.parametrize("shed", [0.0, 0.5])
    def test_penalty_growth_tracks_shedding(self, shed):
        cat, grid = _one_hour_catalog(), TimeGrid(1)
        s = OperationSchedule.zeros(cat, grid)
        s.gen["DU1"][:] = 2.0
        s.shed[:] = shed
        small = operation_cost(s, cat, EconomicParams(shed_penalty=1e6), grid)
        big = operation_cost(s, cat, EconomicParams(shed_penalty=1e12), grid)
        assert (big > 1e11) == (shed > 0)
        if shed == 0:
            assert big == small


def _feasible_one_hour():
    """DU covers load 2 MW plus 10 t of water at 0.05 MW/t; storage idle."""
    cat = _one_hour_catalog()
    grid = TimeGrid(1)
    fc = ForecastSet(np.full((1, 1, 1), 2.0), np.zeros((0, 1, 1, 1)), np.zeros((1, 1, 1)))
    inst = Instance(cat, fc, grid)
    s = OperationSchedule.zeros(cat, grid)
    s.load[:] = 2.0
    s.water[:] = 10.0
    s.gen["DU1"][:] = 2.5
    s.soc[:] = 1.0
    return inst, InvestmentPlan({"DU1": 1, "ESS1": 1}), s


class TestVerify:
    def test_feasible(self):
        inst, plan, s = _feasible_one_hour()
        assert verify_schedule(inst, plan, s) == []

    def test_cyclic_soc_violation(self):
        inst, plan, s = _feasible_one_hour()
        s.ess_discharge[:] = 0.45  # SOC drops by 0.5 within the day and is never restored
        s.gen["DU1"][:] = 2.05
        names = {v.constraint for v in verify_schedule(inst, plan, s)}
        assert "soc_cyclic[ESS1]" in names
        assert "power_balance" not in names

    def test_water_shortfall_reported(self):
        inst, plan, s = _feasible_one_hour()
        s.water[:] = 9.0
        s.gen["DU1"][:] = 2.45
        v = verify_schedule(inst, plan, s)
        assert [x.constraint for x in v] == ["daily_water"]
        assert v[0].index == (1, 1)
        assert v[0].residual == pytest.approx(1.0)

    def test_slack_counts_only_when_allowed(self):
        inst, plan, s = _feasible_one_hour()
        s.water[:] = 9.0
        s.gen["DU1"][:] = 2.45
        s.water_shortfall[:] = 1.0
        assert verify_schedule(inst, plan, s) == []
        assert verify_schedule(inst, plan, s, allow_water_shortfall=False)

    def test_unbuilt_device_output(self):
        inst, _, s = _feasible_one_hour()
        v = verify_schedule(inst, InvestmentPlan({"DU1": 0, "ESS1": 1}), s)
        assert any(x.constraint == "du_limit[DU1]" for x in v)


class TestValidation:
    def test_collects_every_problem(self):
        with pytest.raises(ValidationError) as exc:
            DeviceCatalog(storage=[StorageUnit("E", -1, 0, 1, 1, efficiency=1.2)])
        msgs = " ".join(exc.value.errors)
        assert "rated_power" in msgs and "rated_energy" in msgs and "efficiency" in msgs

    def test_duplicate_ids(self):
        with pytest.raises(ValidationError):
            DeviceCatalog(dispatchable=[DispatchableUnit("X", 1, 1, 1)],
                          renewable=[RenewableUnit("X", 1, 1)])

    def test_forecast_shape_mismatch(self):
        cat = _one_hour_catalog()
        fc = ForecastSet(np.ones((2, 1, 1)), np.zeros((0, 2, 1, 1)), np.ones((2, 1, 1)))
        with pytest.raises(ValidationError):
            Instance(cat, fc, TimeGrid(1))

    def test_shed_penalty_must_dominate(self):
        cat = _one_hour_catalog()
        fc = ForecastSet(np.ones((1, 1, 1)), np.zeros((0, 1, 1, 1)), np.ones((1, 1, 1)))
        with pytest.raises(ValidationError):
            Instance(cat, fc, TimeGrid(1), EconomicParams(shed_penalty=50.0))

    def test_plan_must_match_catalog(self):
        cat = _one_hour_catalog()
        with pytest.raises(ValidationError):
            InvestmentPlan({"DU1": 1}).check(cat)

    def test_restrict_drops_classes(self):
        cat = DeviceCatalog(dispatchable=[DispatchableUnit("D", 1, 1, 1)],
                            tidal=[TidalUnit("T", 1, 1, area=1.0)])
        assert cat.restrict(dispatchable=False).ids == ["T"]
