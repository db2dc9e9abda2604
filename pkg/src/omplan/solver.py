"""Thin MILP modeling layer and solver backends.

Everything that touches a third-party optimizer lives here. Models are
built from :class:`Var` / :class:`LinExpr` objects, compiled once to sparse
arrays, and handed to a backend:

* ``highs`` -- HiGHS through :func:`scipy.optimize.milp` (default)
* ``glpk``  -- GLPK through :mod:`cvxopt` (optional)

The backend is picked by name, falling back to the ``OM_SOLVER``
environment variable and then to ``highs``.
"""

from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

INF = math.inf

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
LIMIT = "limit"
ERROR = "error"


class SolverError(RuntimeError):
    pass


class BackendUnavailable(SolverError):
    pass


class Var:
    __slots__ = ("model", "index")

    def __init__(self, model: "Model", index: int):
        self.model = model
        self.index = index

    @property
    def name(self) -> str:
        return self.model._var_names[self.index]

    @property
    def lb(self) -> float:
        return self.model._lb[self.index]

    @property
    def ub(self) -> float:
        return self.model._ub[self.index]

    @property
    def is_binary(self) -> bool:
        return self.model._binary[self.index]

    def _expr(self) -> "LinExpr":
        return LinExpr({self.index: 1.0})

    def __add__(self, other):
        return self._expr() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self._expr() - other

    def __rsub__(self, other):
        return (-1.0) * self._expr() + other

    def __mul__(self, k):
        return LinExpr({self.index: float(k)})

    __rmul__ = __mul__

    def __neg__(self):
        return LinExpr({self.index: -1.0})

    def __repr__(self):
        return f"Var({self.name})"


class LinExpr:
    """Affine expression ``sum(coef * var) + constant`` keyed by variable index."""

    __slots__ = ("terms", "constant")

    def __init__(self, terms: dict[int, float] | None = None, constant: float = 0.0):
        self.terms = dict(terms) if terms else {}
        self.constant = float(constant)

    def copy(self) -> "LinExpr":
        return LinExpr(self.terms, self.constant)

    def add_term(self, var: Var, coef: float) -> "LinExpr":
        if coef:
            self.terms[var.index] = self.terms.get(var.index, 0.0) + float(coef)
        return self

    def __iadd__(self, other):
        if isinstance(other, Var):
            self.terms[other.index] = self.terms.get(other.index, 0.0) + 1.0
        elif isinstance(other, LinExpr):
            for i, c in other.terms.items():
                self.terms[i] = self.terms.get(i, 0.0) + c
            self.constant += other.constant
        else:
            self.constant += float(other)
        return self

    def __add__(self, other):
        out = self.copy()
        out += other
        return out

    __radd__ = __add__

    def __isub__(self, other):
        self += (-1.0) * other
        return self

    def __sub__(self, other):
        out = self.copy()
        out -= other
        return out

    def __rsub__(self, other):
        return (-1.0) * self + other

    def __mul__(self, k):
        k = float(k)
        return LinExpr({i: c * k for i, c in self.terms.items()}, self.constant * k)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def value(self, x: np.ndarray) -> float:
        return self.constant + sum(c * x[i] for i, c in self.terms.items())

    def __repr__(self):
        return f"LinExpr({len(self.terms)} terms, const={self.constant})"


def quicksum(items: Iterable) -> LinExpr:
    out = LinExpr()
    for it in items:
        out += it
    return out


@dataclass(frozen=True)
class Constr:
    index: int
    name: str


@dataclass
class SolveOptions:
    time_limit: float | None = None
    rel_gap: float = 1e-6
    feas_tol: float = 1e-6
    seed: int = 0
    verbose: bool = False


@dataclass
class SolveOutcome:
    status: str
    objective: float | None = None
    values: np.ndarray | None = None
    wall_time: float = 0.0
    backend: str = ""
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    def __getitem__(self, item):
        if self.values is None:
            raise SolverError(f"no solution values (status={self.status})")
        if isinstance(item, Var):
            return float(self.values[item.index])
        if isinstance(item, LinExpr):
            return item.value(self.values)
        arr = np.asarray(item, dtype=object)
        return np.vectorize(lambda v: float(self.values[v.index]) if v is not None else 0.0,
                            otypes=[float])(arr)


class Model:
    """A linear model with continuous and binary variables.

    Variables and constraints are appended in call order, which fixes the
    column/row order of the compiled matrices and of MPS exports.
    """

    def __init__(self, name: str = "model", sense: str = "min"):
        self.name = name
        self.sense = sense
        self._var_names: list[str] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._binary: list[bool] = []
        self._rows: list[tuple[np.ndarray, np.ndarray]] = []
        self._row_sense: list[str] = []
        self._rhs: list[float] = []
        self._row_names: list[str] = []
        self._names: set[str] = set()
        self.objective = LinExpr()
        self._A = None

    # -- building ---------------------------------------------------------
    def _unique(self, name: str | None, prefix: str, idx: int) -> str:
        if not name:
            name = f"{prefix}{idx}"
        name = name.replace(" ", "_")
        if name in self._names:
            raise ValueError(f"duplicate name {name!r}")
        self._names.add(name)
        return name

    def add_var(self, name: str | None = None, lb: float = 0.0, ub: float = INF,
                binary: bool = False) -> Var:
        idx = len(self._lb)
        if binary:
            lb, ub = max(0.0, lb), min(1.0, ub)
        if lb > ub:
            raise ValueError(f"variable {name}: lb {lb} > ub {ub}")
        self._var_names.append(self._unique(name, "x", idx))
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._binary.append(bool(binary))
        return Var(self, idx)

    def add_constr(self, expr: LinExpr | Var, sense: str, rhs: float = 0.0,
                   name: str | None = None) -> Constr:
        if isinstance(expr, Var):
            expr = expr._expr()
        if sense not in ("<=", ">=", "=="):
            raise ValueError(f"bad sense {sense!r}")
        idx = len(self._rhs)
        cols = np.fromiter(expr.terms.keys(), dtype=np.int64, count=len(expr.terms))
        vals = np.fromiter(expr.terms.values(), dtype=float, count=len(expr.terms))
        if cols.size and cols.max() >= len(self._lb):
            raise ValueError("constraint references an undeclared variable")
        self._rows.append((cols, vals))
        self._row_sense.append(sense)
        self._rhs.append(float(rhs) - expr.constant)
        cname = self._unique(name, "c", idx)
        self._row_names.append(cname)
        self._A = None
        return Constr(idx, cname)

    def set_objective(self, expr: LinExpr | Var, sense: str | None = None):
        self.objective = expr._expr() if isinstance(expr, Var) else expr.copy()
        if sense is not None:
            if sense not in ("min", "max"):
                raise ValueError(sense)
            self.sense = sense

    # -- parametric edits (cheap, keep the compiled matrix) --------------
    def set_rhs(self, con: Constr, value: float):
        self._rhs[con.index] = float(value)

    def set_bounds(self, var: Var, lb: float | None = None, ub: float | None = None):
        if lb is not None:
            self._lb[var.index] = float(lb)
        if ub is not None:
            self._ub[var.index] = float(ub)

    # -- introspection ----------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self._lb)

    @property
    def num_constrs(self) -> int:
        return len(self._rhs)

    @property
    def var_names(self) -> list[str]:
        return list(self._var_names)

    @property
    def constr_names(self) -> list[str]:
        return list(self._row_names)

    def compile(self):
        """Return ``(c, c0, A, senses, rhs, lb, ub, binary)`` as arrays."""
        n = self.num_vars
        c = np.zeros(n)
        for i, v in self.objective.terms.items():
            c[i] += v
        if self._A is None:
            if self._rows:
                indptr = np.zeros(len(self._rows) + 1, dtype=np.int64)
                indptr[1:] = np.cumsum([r[0].size for r in self._rows])
                indices = np.concatenate([r[0] for r in self._rows])
                data = np.concatenate([r[1] for r in self._rows])
                A = sp.csr_matrix((data, indices, indptr), shape=(len(self._rows), n))
                A.sum_duplicates()
            else:
                A = sp.csr_matrix((0, n))
            self._A = A
        elif self._A.shape[1] != n:
            self._A = sp.csr_matrix(self._A, shape=(self._A.shape[0], n))
        return (c, self.objective.constant, self._A, np.array(self._row_sense),
                np.array(self._rhs), np.array(self._lb), np.array(self._ub),
                np.array(self._binary, dtype=bool))


# -- backends -------------------------------------------------------------

def _row_bounds(senses, rhs):
    lo = np.where(senses == "<=", -np.inf, rhs)
    hi = np.where(senses == ">=", np.inf, rhs)
    return lo, hi


def _solve_highs(model: Model, opts: SolveOptions) -> SolveOutcome:
    from scipy.optimize import Bounds, LinearConstraint, milp

    c, c0, A, senses, rhs, lb, ub, binary = model.compile()
    sign = -1.0 if model.sense == "max" else 1.0
    cons = None
    if A.shape[0]:
        lo, hi = _row_bounds(senses, rhs)
        cons = LinearConstraint(A, lo, hi)
    options = {"disp": opts.verbose, "mip_rel_gap": opts.rel_gap, "presolve": True}
    if opts.time_limit is not None:
        options["time_limit"] = float(opts.time_limit)
    t0 = time.perf_counter()
    res = milp(sign * c, integrality=binary.astype(int), bounds=Bounds(lb, ub),
               constraints=cons, options=options)
    wall = time.perf_counter() - t0
    status = {0: OPTIMAL, 1: LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, ERROR)
    if status == ERROR and "infeasible" in (res.message or "").lower():
        status = INFEASIBLE
    out = SolveOutcome(status, wall_time=wall, backend="highs", message=res.message or "")
    if res.x is not None and status in (OPTIMAL, LIMIT):
        x = np.asarray(res.x, dtype=float)
        x[binary] = np.round(x[binary])
        out.values = x
        out.objective = float(c @ x + c0)
    return out


def _solve_glpk(model: Model, opts: SolveOptions) -> SolveOutcome:
    try:
        import cvxopt
        from cvxopt import glpk
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise BackendUnavailable("glpk backend needs cvxopt") from exc

    c, c0, A, senses, rhs, lb, ub, binary = model.compile()
    n = c.size
    sign = -1.0 if model.sense == "max" else 1.0
    A = A.tocsr()
    le = senses == "<="
    ge = senses == ">="
    eq = senses == "=="
    eye = sp.identity(n, format="csr")
    fin_ub = np.isfinite(ub)
    fin_lb = np.isfinite(lb)
    G = sp.vstack([A[le], -A[ge], eye[fin_ub], -eye[fin_lb]]).tocoo()
    h = np.concatenate([rhs[le], -rhs[ge], ub[fin_ub], -lb[fin_lb]])

    def spm(M):
        M = M.tocoo()
        return cvxopt.spmatrix(M.data.tolist(), M.row.tolist(), M.col.tolist(), M.shape)

    Aeq = A[eq]
    glpk.options["msg_lev"] = "GLP_MSG_ALL" if opts.verbose else "GLP_MSG_OFF"
    glpk.options["mip_gap"] = opts.rel_gap
    if opts.time_limit is not None:
        glpk.options["tm_lim"] = int(opts.time_limit * 1000)
    args = [cvxopt.matrix(sign * c), spm(G), cvxopt.matrix(h)]
    if Aeq.shape[0]:
        args += [spm(Aeq), cvxopt.matrix(rhs[eq])]
    else:
        args += [None, None]
    t0 = time.perf_counter()
    st, x = glpk.ilp(*args, I=set(np.flatnonzero(binary).tolist()))
    wall = time.perf_counter() - t0
    if st == "optimal":
        status = OPTIMAL
    elif "infeasible" in st:
        status = INFEASIBLE
    elif "unbounded" in st:
        status = UNBOUNDED
    elif "time" in st or "limit" in st:
        status = LIMIT
    else:
        status = ERROR
    out = SolveOutcome(status, wall_time=wall, backend="glpk", message=st)
    if x is not None and status in (OPTIMAL, LIMIT):
        xv = np.array(x).ravel()
        xv[binary] = np.round(xv[binary])
        out.values = xv
        out.objective = float(c @ xv + c0)
    return out


BACKENDS = {"highs": _solve_highs, "glpk": _solve_glpk}


def backend_name(name: str | None = None) -> str:
    name = (name or os.environ.get("OM_SOLVER") or "highs").lower()
    if name not in BACKENDS:
        raise BackendUnavailable(f"unknown backend {name!r}; choose from {sorted(BACKENDS)}")
    return name


def backend_version(name: str | None = None) -> str:
    name = backend_name(name)
    if name == "highs":
        import scipy
        return f"HiGHS via scipy {scipy.__version__}"
    try:
        import cvxopt
        return f"GLPK via cvxopt {cvxopt.__version__}"
    except ImportError:
        return "GLPK (unavailable)"


def solve(model: Model, options: SolveOptions | None = None, backend: str | None = None) -> SolveOutcome:
    opts = options or SolveOptions()
    name = backend_name(backend)
    out = BACKENDS[name](model, opts)
    log.debug("%s: %s obj=%s (%.3fs, %s)", model.name, out.status, out.objective,
              out.wall_time, name)
    return out


# -- MPS export / import ----------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def export_model(model: Model, path) -> None:
    """Write ``model`` in free MPS format.

    Output depends only on the model contents and their insertion order, so
    building the same model twice gives byte-identical files.
    """
    c, c0, A, senses, rhs, lb, ub, binary = model.compile()
    Acsc = A.tocsc()
    code = {"<=": "L", ">=": "G", "==": "E"}
    lines = [f"NAME {model.name.replace(' ', '_')}"]
    if model.sense == "max":
        lines += ["OBJSENSE", "    MAX"]
    lines.append("ROWS")
    lines.append(" N  OBJ")
    for s, nm in zip(senses, model.constr_names):
        lines.append(f" {code[s]}  {nm}")
    lines.append("COLUMNS")
    in_int = False
    names = model.var_names
    for j in range(model.num_vars):
        if binary[j] and not in_int:
            lines.append("    MARKER  'MARKER'  'INTORG'")
            in_int = True
        elif not binary[j] and in_int:
            lines.append("    MARKER  'MARKER'  'INTEND'")
            in_int = False
        entries = []
        if c[j] != 0.0:
            entries.append(("OBJ", c[j]))
        start, end = Acsc.indptr[j], Acsc.indptr[j + 1]
        for r, v in zip(Acsc.indices[start:end], Acsc.data[start:end]):
            entries.append((model.constr_names[r], v))
        if not entries:
            # keep the column declared even when it has no coefficients
            entries.append(("OBJ", 0.0))
        for rname, v in entries:
            lines.append(f"    {names[j]}  {rname}  {_fmt(v)}")
    if in_int:
        lines.append("    MARKER  'MARKER'  'INTEND'")
    lines.append("RHS")
    if c0 != 0.0:
        lines.append(f"    RHS  OBJ  {_fmt(-c0)}")
    for r, v in enumerate(rhs):
        if v != 0.0:
            lines.append(f"    RHS  {model.constr_names[r]}  {_fmt(v)}")
    lines.append("BOUNDS")
    for j in range(model.num_vars):
        lo, hi = lb[j], ub[j]
        nm = names[j]
        if binary[j] and lo == 0.0 and hi == 1.0:
            lines.append(f" BV BND  {nm}")
            continue
        if lo == -INF and hi == INF:
            lines.append(f" FR BND  {nm}")
            continue
        if lo == hi:
            lines.append(f" FX BND  {nm}  {_fmt(lo)}")
            continue
        if lo == -INF:
            lines.append(f" MI BND  {nm}")
        elif lo != 0.0:
            lines.append(f" LO BND  {nm}  {_fmt(lo)}")
        if hi != INF:
            lines.append(f" UP BND  {nm}  {_fmt(hi)}")
    lines.append("ENDATA")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mps(path) -> Model:
    """Read a free-MPS file written by :func:`export_model`."""
    with open(path) as fh:
        raw = [ln.rstrip("\n") for ln in fh]
    name = "model"
    sense = "min"
    section = None
    row_sense: dict[str, str] = {}
    row_order: list[str] = []
    obj_row = None
    cols: dict[str, dict[str, float]] = {}
    col_order: list[str] = []
    col_int: dict[str, bool] = {}
    rhs: dict[str, float] = {}
    bounds: dict[str, list] = {}
    in_int = False
    inv = {"L": "<=", "G": ">=", "E": "=="}
    for ln in raw:
        if not ln.strip() or ln.startswith("*"):
            continue
        if not ln[0].isspace():
            parts = ln.split()
            section = parts[0]
            if section == "NAME" and len(parts) > 1:
                name = parts[1]
            continue
        parts = ln.split()
        if section == "OBJSENSE":
            sense = "max" if parts[0].upper().startswith("MAX") else "min"
        elif section == "ROWS":
            kind, rname = parts
            if kind == "N":
                obj_row = rname
            else:
                row_sense[rname] = inv[kind]
                row_order.append(rname)
        elif section == "COLUMNS":
            if len(parts) >= 3 and parts[1] == "'MARKER'":
                in_int = parts[2] == "'INTORG'"
                continue
            cname = parts[0]
            if cname not in cols:
                cols[cname] = {}
                col_order.append(cname)
                col_int[cname] = in_int
            for k in range(1, len(parts) - 1, 2):
                cols[cname][parts[k]] = float(parts[k + 1])
        elif section == "RHS":
            for k in range(1, len(parts) - 1, 2):
                rhs[parts[k]] = float(parts[k + 1])
        elif section == "BOUNDS":
            kind, _, cname = parts[:3]
            val = float(parts[3]) if len(parts) > 3 else None
            bounds.setdefault(cname, []).append((kind, val))
    m = Model(name, sense)
    handles = {}
    for cname in col_order:
        lo, hi, is_bin = 0.0, INF, False
        for kind, val in bounds.get(cname, []):
            if kind == "BV":
                lo, hi, is_bin = 0.0, 1.0, True
            elif kind == "FR":
                lo, hi = -INF, INF
            elif kind == "MI":
                lo = -INF
            elif kind == "PL":
                hi = INF
            elif kind == "LO":
                lo = val
            elif kind == "UP":
                hi = val
            elif kind == "FX":
                lo = hi = val
        if col_int[cname] and not is_bin:
            is_bin = lo >= 0.0 and hi <= 1.0
        handles[cname] = m.add_var(cname, lo, hi, binary=is_bin)
    obj = LinExpr(constant=-rhs.get(obj_row, 0.0) if obj_row else 0.0)
    row_exprs = {r: LinExpr() for r in row_order}
    for cname in col_order:
        v = handles[cname]
        for rname, coef in cols[cname].items():
            if rname == obj_row:
                obj.add_term(v, coef)
            else:
                row_exprs[rname].add_term(v, coef)
    for r in row_order:
        m.add_constr(row_exprs[r], row_sense[r], rhs.get(r, 0.0), name=r)
    m.set_objective(obj, sense)
    return m
