"""Domain types and cost arithmetic shared by both planners.

Per-slot arrays are indexed ``[h, d, y]`` (hour, representative day,
year), per-device arrays ``[device, h, d, y]``. Units follow the usual
conventions: MW, MWh, $, t (fresh water), m (tidal height).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np


class ValidationError(ValueError):
    """Raised with the full list of problems found in an input."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class TimeGrid:
    hours_per_day: int = 24
    days: int = 1
    years: int = 1
    day_weight: float = 1.0

    def __post_init__(self):
        errs = []
        for f in ("hours_per_day", "days", "years"):
            if int(getattr(self, f)) < 1:
                errs.append(f"grid.{f} must be >= 1")
        if self.day_weight < 0:
            errs.append("grid.day_weight must be >= 0")
        if errs:
            raise ValidationError(errs)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.hours_per_day, self.days, self.years)

    @property
    def n_slots(self) -> int:
        return self.hours_per_day * self.days * self.years

    def slots(self) -> Iterator[tuple[int, int, int]]:
        """Zero-based ``(h, d, y)`` in year-major, then day, then hour order."""
        for y in range(self.years):
            for d in range(self.days):
                for h in range(self.hours_per_day):
                    yield h, d, y


# -- devices ------------------------------------------------------------------

def _check(errs, cond, msg):
    if not cond:
        errs.append(msg)


@dataclass(frozen=True)
class DispatchableUnit:
    id: str
    rated_power: float  # MW
    levelized_op_cost: float  # $/MWh
    annualized_inv_cost: float  # $/MW

    def problems(self):
        e = []
        for f in ("rated_power", "levelized_op_cost", "annualized_inv_cost"):
            _check(e, getattr(self, f) > 0, f"{self.id}.{f} must be > 0 (got {getattr(self, f)})")
        return e


@dataclass(frozen=True)
class RenewableUnit:
    id: str
    rated_power: float
    annualized_inv_cost: float
    kind: str = "wind"

    def problems(self):
        e = []
        _check(e, self.rated_power > 0, f"{self.id}.rated_power must be > 0 (got {self.rated_power})")
        _check(e, self.annualized_inv_cost > 0,
               f"{self.id}.annualized_inv_cost must be > 0 (got {self.annualized_inv_cost})")
        _check(e, self.kind in ("wind", "solar"), f"{self.id}.kind must be wind or solar (got {self.kind!r})")
        return e


@dataclass(frozen=True)
class StorageUnit:
    id: str
    rated_power: float  # MW
    rated_energy: float  # MWh
    inv_cost_power: float  # $/MW
    inv_cost_energy: float  # $/MWh
    efficiency: float = 0.9

    def problems(self):
        e = []
        _check(e, self.rated_power > 0, f"{self.id}.rated_power must be > 0 (got {self.rated_power})")
        _check(e, self.rated_energy > 0, f"{self.id}.rated_energy must be > 0 (got {self.rated_energy})")
        _check(e, self.inv_cost_power >= 0, f"{self.id}.inv_cost_power must be >= 0")
        _check(e, self.inv_cost_energy >= 0, f"{self.id}.inv_cost_energy must be >= 0")
        _check(e, 0 < self.efficiency <= 1,
               f"{self.id}.efficiency must be in (0, 1] (got {self.efficiency})")
        return e


@dataclass(frozen=True)
class TidalUnit:
    id: str
    rated_power: float  # MW
    annualized_inv_cost: float  # $/MW
    area: float  # m^2
    efficiency: float = 0.9
    levelized_op_cost: float = 0.0  # $/MWh

    def problems(self):
        e = []
        _check(e, self.rated_power > 0, f"{self.id}.rated_power must be > 0 (got {self.rated_power})")
        _check(e, self.annualized_inv_cost > 0, f"{self.id}.annualized_inv_cost must be > 0")
        _check(e, self.area > 0, f"{self.id}.area must be > 0 (got {self.area})")
        _check(e, 0 < self.efficiency <= 1,
               f"{self.id}.efficiency must be in (0, 1] (got {self.efficiency})")
        _check(e, self.levelized_op_cost >= 0, f"{self.id}.levelized_op_cost must be >= 0")
        return e


@dataclass(frozen=True)
class DesalinationUnit:
    rated_capacity: float  # t/h
    annualized_inv_cost: float  # $/yr
    levelized_op_cost: float  # $/t
    power_per_ton: float  # MW per t/h
    daily_demand: float  # t/day
    id: str = "SDU"

    def problems(self, hours_per_day: int | None = None):
        e = []
        _check(e, self.rated_capacity > 0, f"{self.id}.rated_capacity must be > 0")
        _check(e, self.annualized_inv_cost >= 0, f"{self.id}.annualized_inv_cost must be >= 0")
        _check(e, self.levelized_op_cost >= 0, f"{self.id}.levelized_op_cost must be >= 0")
        _check(e, self.power_per_ton > 0, f"{self.id}.power_per_ton must be > 0")
        _check(e, self.daily_demand >= 0, f"{self.id}.daily_demand must be >= 0")
        if hours_per_day is not None:
            _check(e, hours_per_day * self.rated_capacity >= self.daily_demand,
                   f"{self.id}: {hours_per_day} h x {self.rated_capacity} t/h cannot meet "
                   f"daily_demand {self.daily_demand} t")
        return e


@dataclass(frozen=True)
class DeviceCatalog:
    dispatchable: tuple[DispatchableUnit, ...] = ()
    renewable: tuple[RenewableUnit, ...] = ()
    tidal: tuple[TidalUnit, ...] = ()
    storage: tuple[StorageUnit, ...] = ()
    desalination: DesalinationUnit = field(
        default_factory=lambda: DesalinationUnit(1.0, 0.0, 0.0, 1e-3, 0.0))

    def __post_init__(self):
        for f in ("dispatchable", "renewable", "tidal", "storage"):
            object.__setattr__(self, f, tuple(getattr(self, f)))
        errs = []
        for dev in self.devices():
            errs += dev.problems()
        errs += self.desalination.problems()
        ids = self.ids
        if len(set(ids)) != len(ids):
            errs.append(f"duplicate device ids in catalog: {ids}")
        if errs:
            raise ValidationError(errs)

    def devices(self):
        return [*self.dispatchable, *self.renewable, *self.tidal, *self.storage]

    @property
    def ids(self) -> list[str]:
        return [d.id for d in self.devices()]

    @property
    def generators(self):
        """Units counted by the capacity-adequacy constraint."""
        return [*self.dispatchable, *self.renewable, *self.tidal]

    def restrict(self, *, dispatchable=True, renewable=True, storage=True, tidal=True) -> "DeviceCatalog":
        """Drop whole device classes (the case configurations I-VI)."""
        return DeviceCatalog(
            self.dispatchable if dispatchable else (),
            self.renewable if renewable else (),
            self.tidal if tidal else (),
            self.storage if storage else (),
            self.desalination,
        )


@dataclass(frozen=True)
class EconomicParams:
    discount_rate: float = 0.05
    shed_penalty: float = 1e6  # $/MWh
    sea_density: float = 1025.0  # kg/m^3
    gravity: float = 9.81  # m/s^2

    def problems(self, catalog: DeviceCatalog | None = None):
        e = []
        _check(e, self.discount_rate >= 0, f"discount_rate must be >= 0 (got {self.discount_rate})")
        _check(e, self.sea_density > 0, "sea_density must be > 0")
        _check(e, self.gravity > 0, "gravity must be > 0")
        if catalog is not None:
            costs = [u.levelized_op_cost for u in catalog.dispatchable]
            costs += [u.levelized_op_cost for u in catalog.tidal]
            worst = max(costs, default=0.0)
            _check(e, self.shed_penalty > worst,
                   f"shed_penalty {self.shed_penalty} must exceed every levelized operation cost ({worst})")
        else:
            _check(e, self.shed_penalty > 0, "shed_penalty must be > 0")
        return e

    def __post_init__(self):
        errs = self.problems()
        if errs:
            raise ValidationError(errs)


@dataclass(frozen=True)
class ForecastSet:
    load: np.ndarray  # (H, D, Y) MW
    ndu_availability: np.ndarray  # (J, H, D, Y) MW
    tidal_height: np.ndarray  # (H, D, Y) m

    def __post_init__(self):
        for f in ("load", "ndu_availability", "tidal_height"):
            arr = np.array(getattr(self, f), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, f, arr)

    def problems(self, grid: TimeGrid, catalog: DeviceCatalog | None = None):
        e = []
        if self.load.shape != grid.shape:
            e.append(f"load shape {self.load.shape} != grid {grid.shape}")
        if self.tidal_height.shape != grid.shape:
            e.append(f"tidal_height shape {self.tidal_height.shape} != grid {grid.shape}")
        n_j = len(catalog.renewable) if catalog is not None else self.ndu_availability.shape[0]
        if self.ndu_availability.shape != (n_j, *grid.shape):
            e.append(f"ndu_availability shape {self.ndu_availability.shape} != {(n_j, *grid.shape)}")
        for f in ("load", "ndu_availability", "tidal_height"):
            arr = getattr(self, f)
            if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0):
                e.append(f"{f} must be finite and >= 0")
        if catalog is not None and not e:
            for j, u in enumerate(catalog.renewable):
                if self.ndu_availability[j].max(initial=0.0) > u.rated_power + 1e-9:
                    e.append(f"availability of {u.id} exceeds its rated power {u.rated_power}")
        return e


@dataclass(frozen=True)
class Instance:
    """Everything a planner needs apart from the uncertainty settings."""

    catalog: DeviceCatalog
    forecasts: ForecastSet
    grid: TimeGrid
    econ: EconomicParams = field(default_factory=EconomicParams)
    ndu_mode: str = "availability"  # or "rated" (bound NDU output by RP only)
    cap_tidal: bool = True
    enforce_adequacy: bool = True

    def __post_init__(self):
        errs = self.forecasts.problems(self.grid, self.catalog)
        errs += self.econ.problems(self.catalog)
        errs += self.catalog.desalination.problems(self.grid.hours_per_day)
        if self.ndu_mode not in ("availability", "rated"):
            errs.append(f"ndu_mode must be 'availability' or 'rated' (got {self.ndu_mode!r})")
        if errs:
            raise ValidationError(errs)

    @property
    def peak_load(self) -> float:
        return float(self.forecasts.load.max(initial=0.0))

    @property
    def water_penalty(self) -> float:
        """$/t charged on unmet daily fresh-water demand (recourse slack)."""
        return water_shortfall_penalty(self.econ, self.catalog.desalination, self.grid.hours_per_day)


@dataclass(frozen=True)
class InvestmentPlan:
    build: Mapping[str, int]

    def __post_init__(self):
        bad = {k: v for k, v in self.build.items() if v not in (0, 1)}
        if bad:
            raise ValidationError([f"build flag for {k} must be 0 or 1 (got {v})" for k, v in bad.items()])
        object.__setattr__(self, "build", dict(self.build))

    @classmethod
    def from_flags(cls, catalog: DeviceCatalog, flags) -> "InvestmentPlan":
        flags = [int(round(float(f))) for f in flags]
        if len(flags) != len(catalog.ids):
            raise ValidationError(f"{len(flags)} flags for {len(catalog.ids)} devices")
        return cls(dict(zip(catalog.ids, flags)))

    @classmethod
    def all_built(cls, catalog: DeviceCatalog) -> "InvestmentPlan":
        return cls({i: 1 for i in catalog.ids})

    @classmethod
    def empty(cls, catalog: DeviceCatalog) -> "InvestmentPlan":
        return cls({i: 0 for i in catalog.ids})

    def check(self, catalog: DeviceCatalog):
        ids = catalog.ids
        missing = [i for i in ids if i not in self.build]
        extra = [k for k in self.build if k not in ids]
        if missing or extra:
            raise ValidationError(f"plan does not match catalog (missing={missing}, extra={extra})")

    def __getitem__(self, dev_id: str) -> int:
        return self.build[dev_id]

    def flags(self, catalog: DeviceCatalog) -> list[int]:
        self.check(catalog)
        return [self.build[i] for i in catalog.ids]

    def installed(self, units) -> float:
        """Installed rated power (MW) among ``units``."""
        return float(sum(u.rated_power for u in units if self.build.get(u.id, 0)))


@dataclass
class OperationSchedule:
    gen: dict[str, np.ndarray]  # device id -> (H, D, Y) MW, for DU/NDU/TPG
    ess_charge: np.ndarray  # (L, H, D, Y)
    ess_discharge: np.ndarray
    soc: np.ndarray  # state at the start of hour h, MWh
    water: np.ndarray  # (H, D, Y) t
    shed: np.ndarray  # (H, D, Y) MW
    water_shortfall: np.ndarray  # (D, Y) t, recourse slack
    load: np.ndarray  # realized load (H, D, Y)
    cost_inv: float = 0.0
    cost_ope: float = 0.0

    @property
    def total_shed(self) -> float:
        return float(self.shed.sum())

    @property
    def cost_total(self) -> float:
        return self.cost_inv + self.cost_ope

    @classmethod
    def zeros(cls, catalog: DeviceCatalog, grid: TimeGrid) -> "OperationSchedule":
        shp = grid.shape
        n_l = len(catalog.storage)
        return cls(
            gen={u.id: np.zeros(shp) for u in catalog.generators},
            ess_charge=np.zeros((n_l, *shp)),
            ess_discharge=np.zeros((n_l, *shp)),
            soc=np.zeros((n_l, *shp)),
            water=np.zeros(shp),
            shed=np.zeros(shp),
            water_shortfall=np.zeros(shp[1:]),
            load=np.zeros(shp),
        )


# -- cost arithmetic -------------------------------------------------------------

def present_worth_factor(dr: float, y: int) -> float:
    """Discount multiplier of year ``y`` (1-based): ``1 / (1 + dr)**(y - 1)``."""
    if dr < 0:
        raise ValueError(f"discount rate must be >= 0 (got {dr})")
    if int(y) != y or y < 1:
        raise ValueError(f"year index must be an integer >= 1 (got {y})")
    return 1.0 / (1.0 + dr) ** (int(y) - 1)


def annual_capital_cost(catalog: DeviceCatalog, dev) -> float:
    """Annualized capital cost of one candidate device if built."""
    if isinstance(dev, StorageUnit):
        return dev.inv_cost_power * dev.rated_power + dev.inv_cost_energy * dev.rated_energy
    return dev.annualized_inv_cost * dev.rated_power


def discount_sum(grid: TimeGrid, econ: EconomicParams) -> float:
    return sum(present_worth_factor(econ.discount_rate, y) for y in range(1, grid.years + 1))


def investment_cost(catalog: DeviceCatalog, plan: InvestmentPlan, grid: TimeGrid,
                    econ: EconomicParams, include_sdu: bool = True) -> float:
    plan.check(catalog)
    annual = sum(annual_capital_cost(catalog, d) * plan[d.id] for d in catalog.devices())
    if include_sdu:
        annual += catalog.desalination.annualized_inv_cost
    return discount_sum(grid, econ) * annual


def water_shortfall_penalty(econ: EconomicParams, sdu: DesalinationUnit, hours_per_day: int) -> float:
    """$/t for fresh water left unproduced: ``shed_penalty * power_per_ton * hours_per_day``.

    A ton costs more than shedding the energy needed to make it in every
    hour of the day, so the dispatch always sheds load before giving up water.
    """
    return econ.shed_penalty * sdu.power_per_ton * hours_per_day


def operation_cost(schedule: OperationSchedule, catalog: DeviceCatalog, econ: EconomicParams,
                   grid: TimeGrid) -> float:
    """Weighted operating cost; undiscounted.

    Also charges the fresh-water shortfall slack at
    :func:`water_shortfall_penalty` (zero in any acceptable schedule).
    """
    shp = grid.shape
    arrays = [schedule.water, schedule.shed] + list(schedule.gen.values())
    for a in arrays:
        if np.shape(a) != shp:
            raise ValidationError(f"schedule array of shape {np.shape(a)} does not match grid {shp}")
    if np.shape(schedule.water_shortfall) != shp[1:]:
        raise ValidationError("water_shortfall shape does not match (days, years)")
    w = grid.day_weight
    total = 0.0
    for u in catalog.dispatchable:
        total += u.levelized_op_cost * schedule.gen[u.id].sum()
    for u in catalog.tidal:
        total += u.levelized_op_cost * schedule.gen[u.id].sum()
    sdu = catalog.desalination
    total += sdu.levelized_op_cost * schedule.water.sum()
    total += econ.shed_penalty * schedule.shed.sum()
    nu_w = water_shortfall_penalty(econ, sdu, grid.hours_per_day)
    total += nu_w * schedule.water_shortfall.sum()
    return float(w * total)
