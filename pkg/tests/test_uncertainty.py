import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omplan.core import TimeGrid, ValidationError
from omplan.uncertainty import (Realization, UncertaintyConfig, budget, count_patterns, count_realizations,
                                enumerate_realizations, realize_load, realize_tpg)


def _load_only(H, gamma_budget):
    return list(enumerate_realizations(TimeGrid(H), 0, (gamma_budget,), (0,)))


class TestRealizeLoad:
    def setup_method(self):
        self.grid = TimeGrid(1)
        self.cfg = UncertaintyConfig(beta_load=0.5)
        self.nominal = np.full((1, 1, 1), 10.0)

    def test_no_flags(self):
        r = Realization.zeros(self.grid, 0)
        assert realize_load(self.nominal, self.cfg, r)[0, 0, 0] == 10.0

    def test_up(self):
        r = Realization.zeros(self.grid, 0)
        r.load_up[0, 0, 0] = 1
        assert realize_load(self.nominal, self.cfg, r)[0, 0, 0] == 15.0

    def test_down(self):
        r = Realization.zeros(self.grid, 0)
        r.load_down[0, 0, 0] = 1
        assert realize_load(self.nominal, self.cfg, r)[0, 0, 0] == 5.0

    def test_both_directions_rejected(self):
        r = Realization.zeros(self.grid, 0)
        r.load_up[0, 0, 0] = r.load_down[0, 0, 0] = 1
        with pytest.raises(ValidationError):
            realize_load(self.nominal, self.cfg, r)


def test_realize_tpg_down():
    grid = TimeGrid(2)
    r = Realization.zeros(grid, 2)
    r.tpg_down[1, 0, 0, 0] = 1
    nom = np.full((2, 2, 1, 1), 3.0)  # (unit, hour, day, year)
    out = realize_tpg(nom, UncertaintyConfig(beta_tpg=0.5), r)
    assert out[1, 0, 0, 0] == 1.5
    assert (np.delete(out.ravel(), 2) == 3.0).all()


@pytest.mark.parametrize("gamma,grid,expected", [
    (0.0, TimeGrid(24, 3), 0),
    (0.5, TimeGrid(24, 1), 12),
    (1.0, TimeGrid(24, 2), 48),
    (0.3, TimeGrid(5, 1), 1),  # 1.5 rounds down
])
def test_budget(gamma, grid, expected):
    assert budget(gamma, grid) == expected


class TestEnumeration:
    def test_zero_budget(self):
        reals = _load_only(2, 0)
        assert len(reals) == 1
        assert not reals[0].load_up.any() and not reals[0].load_down.any()

    def test_one_of_two(self):
        assert len(_load_only(2, 1)) == 5

    def test_full_budget_three_slots(self):
        assert len(_load_only(3, 3)) == 27 == 1 + 6 + 12 + 8

    def test_no_duplicates(self):
        reals = _load_only(3, 2)
        assert len({r.key() for r in reals}) == len(reals)

    def test_tidal_shared_vs_per_unit(self):
        grid = TimeGrid(2)
        shared = count_realizations(grid, 2, (0,), (1,), tpg_budget="shared")
        per_unit = count_realizations(grid, 2, (0,), (1,), tpg_budget="per_unit")
        assert shared == count_patterns(4, 1) == 9
        assert per_unit == count_patterns(2, 1) ** 2 == 25
        assert len(list(enumerate_realizations(grid, 2, (0,), (1,), tpg_budget="per_unit"))) == 25

    def test_cap(self):
        with pytest.raises(ValidationError):
            list(enumerate_realizations(TimeGrid(24), 0, (12,), (0,), cap=1000))

    @given(st.integers(1, 5), st.integers(0, 5))
    @settings(max_examples=30, deadline=None)
    def test_count_closed_form(self, n, g):
        assert len(_load_only(n, g)) == sum(math.comb(n, m) * 2 ** m for m in range(min(n, g) + 1))

    @given(st.integers(1, 4), st.integers(0, 3), st.integers(0, 2))
    @settings(max_examples=20, deadline=None)
    def test_every_realization_is_in_the_set(self, H, gl, gt):
        grid = TimeGrid(H)
        for r in enumerate_realizations(grid, 1, (gl,), (gt,)):
            assert not (r.load_up & r.load_down).any()
            assert not (r.tpg_up & r.tpg_down).any()
            assert r.load_up.sum() + r.load_down.sum() <= gl
            assert r.tpg_up.sum() + r.tpg_down.sum() <= gt
            assert r.problems(grid, None) == []


@given(st.floats(0, 1), st.lists(st.floats(0, 50), min_size=3, max_size=3), st.integers(0, 2))
def test_adding_up_flag_never_lowers_load(beta, nominal, slot):
    grid = TimeGrid(3)
    cfg = UncertaintyConfig(beta_load=beta)
    nom = np.asarray(nominal).reshape(3, 1, 1)
    r0 = Realization.zeros(grid, 0)
    r1 = Realization.zeros(grid, 0)
    r1.load_up[slot, 0, 0] = 1
    assert (realize_load(nom, cfg, r1) >= realize_load(nom, cfg, r0)).all()
    r2 = Realization.zeros(grid, 0)
    r2.load_down[slot, 0, 0] = 1
    assert (realize_load(nom, cfg, r2) <= realize_load(nom, cfg, r0)).all()


@given(st.integers(0, 2**6 - 1))
def test_zero_beta_ignores_flags(bits):
    grid = TimeGrid(3)
    r = Realization.zeros(grid, 0)
    for i in range(3):
        if bits >> i & 1:
            r.load_up[i, 0, 0] = 1
        elif bits >> (i + 3) & 1:
            r.load_down[i, 0, 0] = 1
    nom = np.array([1.0, 2.0, 3.0]).reshape(3, 1, 1)
    assert np.array_equal(realize_load(nom, UncertaintyConfig(beta_load=0.0), r), nom)


def test_config_validation_lists_all_errors():
    with pytest.raises(ValidationError) as exc:
        UncertaintyConfig(beta_load=1.5, gamma_tpg=-0.1, delta_t=7, tpg_budget="pooled")
    assert len(exc.value.errors) == 4


def test_per_year_budgets():
    grid = TimeGrid(4, 1, 2)
    cfg = UncertaintyConfig(gamma_load=(0.5, 0.25))
    assert cfg.load_budgets(grid) == (2, 1)
    with pytest.raises(ValidationError):
        UncertaintyConfig(gamma_load=(0.5,)).load_budgets(grid)


def test_realization_dict_round_trip():
    grid = TimeGrid(3, 2, 1)
    r = Realization.zeros(grid, 2)
    r.load_up[2, 1, 0] = 1
    r.load_down[0, 0, 0] = 1
    r.tpg_down[1, 1, 1, 0] = 1
    back = Realization.from_dict(r.to_dict())
    assert back == r
    assert r.to_dict()["tpg_down"] == [[2, 2, 1, 2]]


def test_realization_budget_check():
    grid = TimeGrid(3)
    r = Realization.zeros(grid, 0)
    r.load_up[:2] = 1
    assert r.problems(grid, UncertaintyConfig(gamma_load=0.34))
    assert not r.problems(grid, UncertaintyConfig(gamma_load=0.67))
