import numpy as np
import pytest

from omplan import solver as S
from omplan.fixtures import reference_instance
from omplan.dpm import build_dpm

BACKENDS = ["highs"]
try:
    import cvxopt  # noqa: F401
    BACKENDS.append("glpk")
except ImportError:  # pragma: no cover
    pass


@pytest.mark.parametrize("backend", BACKENDS)
def test_bounded_max(backend):
    m = S.Model("t", sense="max")
    x = m.add_var("x")
    m.add_constr(x, "<=", 3.0)
    m.set_objective(x)
    out = S.solve(m, backend=backend)
    assert out.status == S.OPTIMAL
    assert out[x] == pytest.approx(3.0)
    assert out.objective == pytest.approx(3.0)


@pytest.mark.parametrize("backend", BACKENDS)
def test_infeasible(backend):
    m = S.Model("t")
    x = m.add_var("x", lb=-S.INF)
    m.add_constr(x, ">=", 1.0)
    m.add_constr(x, "<=", 0.0)
    m.set_objective(x)
    out = S.solve(m, backend=backend)
    assert out.status == S.INFEASIBLE
    assert not out.ok


@pytest.mark.parametrize("backend", BACKENDS)
def test_knapsack_picks_more_valuable_item(backend):
    # two items of weight 3 and 4, capacity 5: only one fits
    m = S.Model("knap", sense="max")
    a, b = m.add_var("a", binary=True), m.add_var("b", binary=True)
    m.add_constr(3 * a + 4 * b, "<=", 5.0)
    m.set_objective(5 * a + 7 * b)
    out = S.solve(m, backend=backend)
    assert (out[a], out[b]) == (0.0, 1.0)
    assert out.objective == pytest.approx(7.0)


def test_backends_agree_on_dpm():
    if "glpk" not in BACKENDS:
        pytest.skip("cvxopt not installed")
    dm = build_dpm(reference_instance(6))
    h = S.solve(dm.model, backend="highs")
    g = S.solve(dm.model, backend="glpk")
    assert h.objective == pytest.approx(g.objective, rel=1e-6)


def test_objective_constant_and_expressions():
    m = S.Model("t")
    x, y = m.add_var("x", ub=2), m.add_var("y", ub=2)
    expr = S.quicksum([x, 2 * y]) - 1.5
    m.add_constr(x + y, ">=", 3.0, name="need")
    m.set_objective(expr + 10.0)
    out = S.solve(m)
    # cheapest: x=2, y=1 -> 2 + 2 - 1.5 + 10
    assert out.objective == pytest.approx(12.5)
    assert out[expr] == pytest.approx(2.5)


def test_duplicate_names_rejected():
    m = S.Model("t")
    m.add_var("x")
    with pytest.raises(ValueError):
        m.add_var("x")


def test_set_rhs_and_bounds_resolve():
    m = S.Model("t", sense="max")
    x = m.add_var("x", ub=10)
    c = m.add_constr(x, "<=", 3.0)
    m.set_objective(x)
    assert S.solve(m).objective == pytest.approx(3.0)
    m.set_rhs(c, 7.0)
    assert S.solve(m).objective == pytest.approx(7.0)
    m.set_bounds(x, ub=5.0)
    assert S.solve(m).objective == pytest.approx(5.0)


def test_unknown_backend():
    with pytest.raises(S.BackendUnavailable):
        S.backend_name("cplex-free-edition")


def test_env_fallback(monkeypatch):
    monkeypatch.setenv("OM_SOLVER", "glpk")
    assert S.backend_name() == "glpk"
    monkeypatch.delenv("OM_SOLVER")
    assert S.backend_name() == "highs"


def _small_milp():
    m = S.Model("mix", sense="max")
    x = m.add_var("x", lb=-2.0, ub=4.5)
    y = m.add_var("y", binary=True)
    z = m.add_var("z", lb=-S.INF, ub=S.INF)
    w = m.add_var("w", lb=1.25, ub=1.25)
    m.add_constr(x + 3 * y + z, "<=", 6.0, name="cap")
    m.add_constr(z - x, ">=", -1.0, name="link")
    m.add_constr(z + w, "==", 2.0, name="fix")
    m.set_objective(2 * x + 1.5 * y - 0.25 * z + 0.1)
    return m


def test_mps_round_trip(tmp_path):
    m = _small_milp()
    path = tmp_path / "m.mps"
    S.export_model(m, path)
    back = S.read_mps(path)
    a, b = S.solve(m), S.solve(back)
    assert a.objective == pytest.approx(b.objective, abs=1e-6)
    assert back.var_names == m.var_names
    assert back.constr_names == m.constr_names
    ca, cb = m.compile(), back.compile()
    assert np.array_equal(ca[0], cb[0]) and ca[1] == cb[1]
    assert (ca[2] != cb[2]).nnz == 0


def test_mps_export_is_deterministic(tmp_path):
    inst = reference_instance(6)
    S.export_model(build_dpm(inst).model, tmp_path / "a.mps")
    S.export_model(build_dpm(inst).model, tmp_path / "b.mps")
    assert (tmp_path / "a.mps").read_bytes() == (tmp_path / "b.mps").read_bytes()


def test_dpm_mps_resolves_to_same_objective(tmp_path):
    dm = build_dpm(reference_instance(6))
    S.export_model(dm.model, tmp_path / "dpm.mps")
    again = S.solve(S.read_mps(tmp_path / "dpm.mps"))
    assert again.objective == pytest.approx(S.solve(dm.model).objective, rel=1e-6)
