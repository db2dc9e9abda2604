"""Budget uncertainty sets for load demand and tidal generation.

Each hourly slot may sit at its forecast, or move up or down by a fixed
fraction ``beta`` of it. Per year, at most ``floor(gamma * D * H)`` slots
may deviate. For tidal generation the budget is shared by all tidal units
unless ``tpg_budget="per_unit"``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import TimeGrid, ValidationError

DEFAULT_ENUM_CAP = 200_000


def _per_year(gamma, years: int) -> tuple[float, ...]:
    if np.ndim(gamma) == 0:
        return (float(gamma),) * years
    g = tuple(float(v) for v in gamma)
    if len(g) != years:
        raise ValidationError(f"expected {years} per-year budget coefficients, got {len(g)}")
    return g


@dataclass(frozen=True)
class UncertaintyConfig:
    beta_load: float = 0.0
    beta_tpg: float = 0.0
    gamma_load: float | tuple[float, ...] = 0.0
    gamma_tpg: float | tuple[float, ...] = 0.0
    delta_t: int = 0
    tpg_budget: str = "shared"

    def __post_init__(self):
        errs = []
        for f in ("beta_load", "beta_tpg"):
            v = getattr(self, f)
            # beta = 1 is allowed: the lower deviation is then exactly zero
            if not 0.0 <= v <= 1.0:
                errs.append(f"{f} must be in [0, 1] (got {v})")
        for f in ("gamma_load", "gamma_tpg"):
            vals = np.atleast_1d(np.asarray(getattr(self, f), dtype=float))
            if np.any(vals < 0) or np.any(vals > 1):
                errs.append(f"{f} must be in [0, 1] (got {getattr(self, f)})")
            if np.ndim(getattr(self, f)):
                object.__setattr__(self, f, tuple(float(v) for v in vals))
        if int(self.delta_t) != self.delta_t or abs(self.delta_t) > 4:
            errs.append(f"delta_t must be an integer in [-4, 4] (got {self.delta_t})")
        if self.tpg_budget not in ("shared", "per_unit"):
            errs.append(f"tpg_budget must be 'shared' or 'per_unit' (got {self.tpg_budget!r})")
        if errs:
            raise ValidationError(errs)

    def load_budgets(self, grid: TimeGrid) -> tuple[int, ...]:
        return tuple(budget(g, grid) for g in _per_year(self.gamma_load, grid.years))

    def tpg_budgets(self, grid: TimeGrid) -> tuple[int, ...]:
        return tuple(budget(g, grid) for g in _per_year(self.gamma_tpg, grid.years))

    def replace(self, **kw) -> "UncertaintyConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return UncertaintyConfig(**d)


def budget(gamma: float, grid: TimeGrid) -> int:
    """Number of slots per year allowed to deviate: ``floor(gamma * D * H)``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"budget coefficient must be in [0, 1] (got {gamma})")
    # tolerance guards products such as 0.29 * 100 = 28.999999999999996
    return int(math.floor(gamma * grid.days * grid.hours_per_day + 1e-9))


@dataclass
class Realization:
    load_up: np.ndarray  # (H, D, Y) 0/1
    load_down: np.ndarray
    tpg_up: np.ndarray  # (K, H, D, Y) 0/1
    tpg_down: np.ndarray

    def __post_init__(self):
        for f in ("load_up", "load_down", "tpg_up", "tpg_down"):
            setattr(self, f, np.asarray(getattr(self, f), dtype=np.int8))

    @classmethod
    def zeros(cls, grid: TimeGrid, n_tpg: int) -> "Realization":
        shp = grid.shape
        return cls(np.zeros(shp), np.zeros(shp), np.zeros((n_tpg, *shp)), np.zeros((n_tpg, *shp)))

    @property
    def n_tpg(self) -> int:
        return self.tpg_up.shape[0]

    def key(self) -> bytes:
        return b"".join(np.ascontiguousarray(a).tobytes()
                        for a in (self.load_up, self.load_down, self.tpg_up, self.tpg_down))

    def __eq__(self, other):
        return isinstance(other, Realization) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def problems(self, grid: TimeGrid, config: UncertaintyConfig | None = None) -> list[str]:
        e = []
        shp = grid.shape
        if self.load_up.shape != shp or self.load_down.shape != shp:
            e.append(f"load flags must have shape {shp}")
        if self.tpg_up.shape != self.tpg_down.shape or self.tpg_up.shape[1:] != shp:
            e.append(f"tidal flags must have shape (K, {shp})")
        if e:
            return e
        for name in ("load_up", "load_down", "tpg_up", "tpg_down"):
            a = getattr(self, name)
            if a.size and (a.min() < 0 or a.max() > 1):
                e.append(f"{name} must be binary")
        if np.any(self.load_up + self.load_down > 1):
            e.append("load slot flagged both up and down")
        if np.any(self.tpg_up + self.tpg_down > 1):
            e.append("tidal slot flagged both up and down")
        if config is not None:
            lb = config.load_budgets(grid)
            tb = config.tpg_budgets(grid)
            lused = (self.load_up + self.load_down).sum(axis=(0, 1))
            for y in range(grid.years):
                if lused[y] > lb[y]:
                    e.append(f"year {y + 1}: {lused[y]} load deviations exceed budget {lb[y]}")
            tflags = self.tpg_up + self.tpg_down
            if config.tpg_budget == "shared":
                tused = tflags.sum(axis=(0, 1, 2)) if tflags.size else np.zeros(grid.years, int)
                for y in range(grid.years):
                    if tused[y] > tb[y]:
                        e.append(f"year {y + 1}: {tused[y]} tidal deviations exceed budget {tb[y]}")
            else:
                tused = tflags.sum(axis=(1, 2))
                for k in range(tflags.shape[0]):
                    for y in range(grid.years):
                        if tused[k, y] > tb[y]:
                            e.append(f"unit {k}, year {y + 1}: {tused[k, y]} tidal deviations "
                                     f"exceed budget {tb[y]}")
        return e

    def validate(self, grid: TimeGrid, config: UncertaintyConfig | None = None):
        errs = self.problems(grid, config)
        if errs:
            raise ValidationError(errs)

    def to_dict(self) -> dict:
        """Sparse JSON form: lists of 1-based (hour, day, year[, unit]) deviations."""
        def idx(a, with_unit=False):
            out = []
            for t in zip(*np.nonzero(a)):
                t = [int(v) + 1 for v in t]
                out.append(t[1:] + [t[0]] if with_unit else t)
            return sorted(out)
        return {
            "shape": {"hours": int(self.load_up.shape[0]), "days": int(self.load_up.shape[1]),
                      "years": int(self.load_up.shape[2]), "tidal_units": int(self.n_tpg)},
            "load_up": idx(self.load_up),
            "load_down": idx(self.load_down),
            "tpg_up": idx(self.tpg_up, True),
            "tpg_down": idx(self.tpg_down, True),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Realization":
        s = data["shape"]
        grid = TimeGrid(s["hours"], s["days"], s["years"])
        r = cls.zeros(grid, s["tidal_units"])
        for name in ("load_up", "load_down"):
            arr = getattr(r, name)
            for h, d, y in data.get(name, []):
                arr[h - 1, d - 1, y - 1] = 1
        for name in ("tpg_up", "tpg_down"):
            arr = getattr(r, name)
            for h, d, y, k in data.get(name, []):
                arr[k - 1, h - 1, d - 1, y - 1] = 1
        return r


def _deviation(nominal, beta, up, down):
    return np.asarray(nominal, dtype=float) * (1.0 - beta * down + beta * up)


def realize_load(forecast, config: UncertaintyConfig, realization: Realization):
    """Load after deviations: ``L = L~ * (1 - beta*u_down + beta*u_up)``."""
    forecast = np.asarray(forecast, dtype=float)
    if np.any(realization.load_up + realization.load_down > 1):
        raise ValidationError("load slot flagged both up and down")
    if realization.load_up.shape != forecast.shape:
        raise ValidationError("realization does not match the load forecast shape")
    return _deviation(forecast, config.beta_load, realization.load_up, realization.load_down)


def realize_tpg(nominal, config: UncertaintyConfig, realization: Realization):
    """Tidal availability after deviations, same rule as :func:`realize_load`."""
    nominal = np.asarray(nominal, dtype=float)
    if np.any(realization.tpg_up + realization.tpg_down > 1):
        raise ValidationError("tidal slot flagged both up and down")
    if realization.tpg_up.shape != nominal.shape:
        raise ValidationError("realization does not match the tidal profile shape")
    return _deviation(nominal, config.beta_tpg, realization.tpg_up, realization.tpg_down)


# -- enumeration (brute-force oracle) -----------------------------------------------

def count_patterns(n_slots: int, gamma_budget: int) -> int:
    """Signed deviation patterns on ``n_slots``: ``sum_m C(n, m) 2^m`` for m <= budget."""
    return sum(math.comb(n_slots, m) * 2 ** m for m in range(min(gamma_budget, n_slots) + 1))


def _patterns(slots, gamma_budget):
    """Yield tuples of ``(slot, +1/-1)`` with at most ``gamma_budget`` entries."""
    for m in range(min(gamma_budget, len(slots)) + 1):
        for chosen in itertools.combinations(slots, m):
            for signs in itertools.product((1, -1), repeat=m):
                yield tuple(zip(chosen, signs))


def _set_layout(grid, n_tpg, load_budgets, tpg_budgets, tpg_budget, tpg_units, include_load):
    H, D, Y = grid.shape
    if len(load_budgets) != Y or len(tpg_budgets) != Y:
        raise ValidationError("one budget per year is required")
    groups = []  # (kind, slots, budget)
    for y in range(Y):
        if include_load:
            groups.append(("load", [(h, d, y) for d in range(D) for h in range(H)], load_budgets[y]))
        units = range(n_tpg) if tpg_units is None else sorted(tpg_units)
        if tpg_budget == "shared":
            slots = [(k, h, d, y) for k in units for d in range(D) for h in range(H)]
            groups.append(("tpg", slots, tpg_budgets[y]))
        else:
            for k in units:
                groups.append(("tpg", [(k, h, d, y) for d in range(D) for h in range(H)],
                               tpg_budgets[y]))
    return groups


def count_realizations(grid: TimeGrid, n_tpg: int, load_budgets, tpg_budgets, *,
                       tpg_budget: str = "shared", tpg_units=None, include_load: bool = True) -> int:
    groups = _set_layout(grid, n_tpg, load_budgets, tpg_budgets, tpg_budget, tpg_units, include_load)
    return math.prod(count_patterns(len(s), b) for _, s, b in groups)


def enumerate_realizations(grid: TimeGrid, n_tpg: int, load_budgets, tpg_budgets, *,
                           tpg_budget: str = "shared", tpg_units=None, include_load: bool = True,
                           cap: int = DEFAULT_ENUM_CAP):
    """Yield every realization in the budget set, without duplicates.

    ``tpg_units`` restricts which tidal units may deviate (default all) and
    ``include_load=False`` freezes the load at its forecast.
    """
    groups = _set_layout(grid, n_tpg, load_budgets, tpg_budgets, tpg_budget, tpg_units, include_load)
    total = math.prod(count_patterns(len(s), b) for _, s, b in groups)
    if total > cap:
        raise ValidationError(f"{total} realizations exceed the enumeration cap {cap}")
    base = Realization.zeros(grid, n_tpg)
    for combo in itertools.product(*[list(_patterns(s, b)) for _, s, b in groups]):
        r = Realization(base.load_up.copy(), base.load_down.copy(),
                        base.tpg_up.copy(), base.tpg_down.copy())
        for (kind, _, _), pattern in zip(groups, combo):
            for slot, sign in pattern:
                if kind == "load":
                    (r.load_up if sign > 0 else r.load_down)[slot] = 1
                else:
                    (r.tpg_up if sign > 0 else r.tpg_down)[slot] = 1
        yield r
