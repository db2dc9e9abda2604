"""Run configuration, data files and result files.

A run is described by one JSON file that points at a device catalog (JSON)
and an hourly forecast table (CSV) by paths relative to the config file.

Forecast CSV columns: ``year, day, hour`` (1-based), ``load_mw``,
``tidal_height_m`` and one availability column (MW) per renewable unit id.
Every (year, day, hour) of the grid must appear exactly once.

Result files are written with a fixed field order so that two runs with the
same inputs produce identical bytes; only ``manifest.json`` (wall time) varies.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import solver as S
from .core import (DesalinationUnit, DeviceCatalog, DispatchableUnit, EconomicParams, ForecastSet,
                   Instance, InvestmentPlan, OperationSchedule, RenewableUnit, StorageUnit, TidalUnit,
                   TimeGrid, ValidationError)
from .uncertainty import Realization, UncertaintyConfig

DEVICE_TYPES = {
    "dispatchable": DispatchableUnit,
    "renewable": RenewableUnit,
    "tidal": TidalUnit,
    "storage": StorageUnit,
}
FORECAST_KEYS = ("year", "day", "hour")
FLOAT_FMT = "%.12g"


@dataclass
class RunConfig:
    """Everything a CLI command needs, validated."""
    instance: Instance
    uconfig: UncertaintyConfig
    options: S.SolveOptions
    backend: str | None = None
    method: str = "dual"
    eps: float = 1e-4
    max_iter: int = 50
    workers: int = 1
    sweep: dict = field(default_factory=dict)
    plan: InvestmentPlan | None = None
    realization: Realization | None = None
    echo: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)  # path -> sha256


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _build(cls, data, where, errors, **extra):
    """Instantiate a validated dataclass, appending problems to ``errors``."""
    if not isinstance(data, dict):
        errors.append(f"{where}: expected an object")
        return None
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        errors.append(f"{where}: unknown fields {unknown}")
    kwargs = {k: v for k, v in data.items() if k in names}
    kwargs.update(extra)
    try:
        obj = cls(**kwargs)
    except TypeError as exc:
        errors.append(f"{where}: {exc}")
        return None
    except ValidationError as exc:
        errors.extend(f"{where}: {e}" for e in exc.errors)
        return None
    problems = obj.problems() if hasattr(obj, "problems") and cls is not EconomicParams else []
    errors.extend(f"{where}: {p}" for p in problems)
    return None if problems else obj


# -- catalog -------------------------------------------------------------------------

def catalog_to_dict(catalog: DeviceCatalog) -> dict:
    out = {}
    for group in DEVICE_TYPES:
        out[group] = [{f.name: getattr(u, f.name) for f in fields(u)} for u in getattr(catalog, group)]
    sdu = catalog.desalination
    out["desalination"] = {f.name: getattr(sdu, f.name) for f in fields(sdu)}
    return out


def parse_catalog(data: dict, errors: list[str]) -> DeviceCatalog | None:
    if not isinstance(data, dict):
        errors.append("catalog: expected an object")
        return None
    unknown = sorted(set(data) - set(DEVICE_TYPES) - {"desalination"})
    if unknown:
        errors.append(f"catalog: unknown sections {unknown}")
    groups = {}
    n_before = len(errors)
    for group, cls in DEVICE_TYPES.items():
        items = data.get(group, [])
        if not isinstance(items, list):
            errors.append(f"catalog.{group}: expected a list")
            continue
        groups[group] = [_build(cls, item, f"catalog.{group}[{i}]", errors) for i, item in enumerate(items)]
    if "desalination" not in data:
        errors.append("catalog.desalination: missing")
        sdu = None
    else:
        sdu = _build(DesalinationUnit, data["desalination"], "catalog.desalination", errors)
    if len(errors) > n_before:
        return None
    try:
        return DeviceCatalog(desalination=sdu, **groups)
    except ValidationError as exc:
        errors.extend(f"catalog: {e}" for e in exc.errors)
        return None


def write_catalog(catalog: DeviceCatalog, path):
    Path(path).write_text(json.dumps(catalog_to_dict(catalog), indent=2) + "\n")


def read_catalog(path) -> DeviceCatalog:
    errors: list[str] = []
    cat = parse_catalog(json.loads(Path(path).read_text()), errors)
    if errors:
        raise ValidationError(errors)
    return cat


# -- forecasts -----------------------------------------------------------------------

def write_forecasts(forecasts: ForecastSet, catalog: DeviceCatalog, path):
    H, D, Y = forecasts.load.shape
    ids = [u.id for u in catalog.renewable]
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow([*FORECAST_KEYS, "load_mw", "tidal_height_m", *ids])
        for y in range(Y):
            for d in range(D):
                for h in range(H):
                    row = [y + 1, d + 1, h + 1, forecasts.load[h, d, y], forecasts.tidal_height[h, d, y]]
                    row += [forecasts.ndu_availability[j, h, d, y] for j in range(len(ids))]
                    w.writerow([row[0], row[1], row[2], *(FLOAT_FMT % v for v in row[3:])])


def parse_forecasts(path, grid: TimeGrid, catalog: DeviceCatalog, errors: list[str]) -> ForecastSet | None:
    H, D, Y = grid.shape
    ids = [u.id for u in catalog.renewable]
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        needed = [*FORECAST_KEYS, "load_mw", "tidal_height_m", *ids]
        missing = [c for c in needed if c not in header]
        if missing:
            errors.append(f"{path}: missing columns {missing}")
            return None
        load = np.full(grid.shape, np.nan)
        tide = np.full(grid.shape, np.nan)
        avail = np.full((len(ids), *grid.shape), np.nan)
        for line, row in enumerate(reader, start=2):
            try:
                y, d, h = (int(row[k]) for k in FORECAST_KEYS)
            except (TypeError, ValueError):
                errors.append(f"{path}:{line}: year/day/hour must be integers")
                continue
            if not (1 <= y <= Y and 1 <= d <= D and 1 <= h <= H):
                errors.append(f"{path}:{line}: (y,d,h)=({y},{d},{h}) outside the grid {Y}x{D}x{H}")
                continue
            if not math.isnan(load[h - 1, d - 1, y - 1]):
                errors.append(f"{path}:{line}: duplicate (y,d,h)=({y},{d},{h})")
                continue
            try:
                load[h - 1, d - 1, y - 1] = float(row["load_mw"])
                tide[h - 1, d - 1, y - 1] = float(row["tidal_height_m"])
                for j, uid in enumerate(ids):
                    avail[j, h - 1, d - 1, y - 1] = float(row[uid])
            except (TypeError, ValueError):
                errors.append(f"{path}:{line}: non-numeric forecast value")
    for (h, d, y) in zip(*np.nonzero(np.isnan(load))):
        errors.append(f"{path}: missing forecast row for (y,d,h)=({y + 1},{d + 1},{h + 1})")
    if np.isnan(load).any() or np.isnan(tide).any() or np.isnan(avail).any():
        return None
    fc = ForecastSet(load, avail, tide)
    problems = fc.problems(grid, catalog)
    errors.extend(f"{path}: {p}" for p in problems)
    return None if problems else fc


# -- run config ----------------------------------------------------------------------

def _uconfig(data, errors):
    data = dict(data or {})
    for k in ("gamma_load", "gamma_tpg"):
        if isinstance(data.get(k), list):
            data[k] = tuple(data[k])
    return _build(UncertaintyConfig, data, "uncertainty", errors)


def load_run_config(path) -> RunConfig:
    """Read and validate a run config; raises ValidationError listing every problem."""
    path = Path(path)
    errors: list[str] = []
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError([f"{path}: {exc}"]) from exc
    base = path.parent
    known = {"catalog", "forecasts", "grid", "economics", "instance", "uncertainty", "solver", "ccg",
             "sweep", "plan", "realization"}
    unknown = sorted(set(raw) - known)
    if unknown:
        errors.append(f"{path}: unknown keys {unknown}")
    inputs = {str(path.name): sha256_file(path)}

    def data_file(key):
        rel = raw.get(key)
        if rel is None:
            return None
        p = base / rel
        if not p.is_file():
            errors.append(f"{key}: file not found: {p}")
            return None
        inputs[str(rel)] = sha256_file(p)
        return p

    catalog = None
    cat_path = data_file("catalog")
    if cat_path is None and "catalog" not in raw:
        errors.append("catalog: missing")
    if cat_path is not None:
        catalog = parse_catalog(json.loads(cat_path.read_text()), errors)
    grid = _build(TimeGrid, raw.get("grid", {}), "grid", errors)
    econ = _build(EconomicParams, raw.get("economics", {}), "economics", errors)
    uconfig = _uconfig(raw.get("uncertainty"), errors)
    solver_cfg = dict(raw.get("solver", {}))
    backend = solver_cfg.pop("backend", None)
    if backend is not None:
        try:
            S.backend_name(backend)
        except S.BackendUnavailable as exc:
            errors.append(f"solver.backend: {exc}")
    options = _build(S.SolveOptions, solver_cfg, "solver", errors)
    ccg = dict(raw.get("ccg", {}))
    for k in sorted(set(ccg) - {"eps", "max_iter", "method", "workers"}):
        errors.append(f"ccg: unknown field {k!r}")
    if not float(ccg.get("eps", 1e-4)) >= 0:
        errors.append("ccg.eps must be >= 0")
    if int(ccg.get("max_iter", 50)) < 1:
        errors.append("ccg.max_iter must be >= 1")
    if ccg.get("method", "dual") not in ("dual", "enumerate", "enum"):
        errors.append(f"ccg.method must be dual or enumerate (got {ccg.get('method')!r})")

    forecasts = None
    fc_path = data_file("forecasts")
    if fc_path is None and "forecasts" not in raw:
        errors.append("forecasts: missing")
    if fc_path is not None and grid is not None and catalog is not None:
        forecasts = parse_forecasts(fc_path, grid, catalog, errors)

    instance = None
    if not errors:
        try:
            instance = Instance(catalog, forecasts, grid, econ, **raw.get("instance", {}))
        except ValidationError as exc:
            errors.extend(f"instance: {e}" for e in exc.errors)
        except TypeError as exc:
            errors.append(f"instance: {exc}")

    plan = realization = None
    plan_path = data_file("plan")
    if plan_path is not None and catalog is not None:
        try:
            plan = read_plan(plan_path, catalog)
        except ValidationError as exc:
            errors.extend(f"plan: {e}" for e in exc.errors)
    real_path = data_file("realization")
    if real_path is not None:
        try:
            realization = Realization.from_dict(json.loads(real_path.read_text()))
            if grid is not None and catalog is not None and uconfig is not None:
                errors.extend(f"realization: {p}" for p in realization.problems(grid, uconfig))
        except (ValueError, KeyError, ValidationError) as exc:
            errors.append(f"realization: {exc}")
    if errors:
        raise ValidationError(errors)
    return RunConfig(instance, uconfig, options, backend, method=ccg.get("method", "dual"),
                     eps=float(ccg.get("eps", 1e-4)), max_iter=int(ccg.get("max_iter", 50)),
                     workers=int(ccg.get("workers", 1)), sweep=dict(raw.get("sweep", {})),
                     plan=plan, realization=realization, echo=raw, inputs=inputs)


# -- results -------------------------------------------------------------------------

def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")


def plan_to_dict(plan: InvestmentPlan, catalog: DeviceCatalog) -> dict:
    return {"build": {uid: int(plan[uid]) for uid in catalog.ids},
            "installed_mw": {g: plan.installed(getattr(catalog, g))
                             for g in ("dispatchable", "renewable", "tidal", "storage")}}


def write_plan(plan: InvestmentPlan, catalog: DeviceCatalog, path):
    _dump_json(plan_to_dict(plan, catalog), path)


def read_plan(path, catalog: DeviceCatalog | None = None) -> InvestmentPlan:
    data = json.loads(Path(path).read_text())
    build = data.get("build", data)
    bad = [k for k, v in build.items() if v not in (0, 1)]
    if bad:
        raise ValidationError([f"build flags must be 0 or 1: {bad}"])
    plan = InvestmentPlan({k: int(v) for k, v in build.items()})
    if catalog is not None:
        plan.check(catalog)
    return plan


SCHEDULE_HEADER = ("year", "day", "hour", "variable", "device", "value")


def _schedule_rows(schedule: OperationSchedule, catalog: DeviceCatalog):
    load = np.asarray(schedule.load)
    if load.size == 0:
        return
    H, D, Y = load.shape
    storage = [u.id for u in catalog.storage]
    for y in range(Y):
        for d in range(D):
            for h in range(H):
                key = (y + 1, d + 1, h + 1)
                yield (*key, "load", "", load[h, d, y])
                yield (*key, "shed", "", schedule.shed[h, d, y])
                yield (*key, "water", "", schedule.water[h, d, y])
                for uid, arr in schedule.gen.items():
                    yield (*key, "gen", uid, arr[h, d, y])
                for l, uid in enumerate(storage):
                    yield (*key, "charge", uid, schedule.ess_charge[l, h, d, y])
                    yield (*key, "discharge", uid, schedule.ess_discharge[l, h, d, y])
                    yield (*key, "soc", uid, schedule.soc[l, h, d, y])
            yield (y + 1, d + 1, "", "water_shortfall", "", schedule.water_shortfall[d, y])


def write_schedule(schedule: OperationSchedule | None, catalog: DeviceCatalog, path):
    """Long-format schedule: one row per (slot, variable, device); header only if empty."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SCHEDULE_HEADER)
        if schedule is None:
            return
        for *key, var, dev, val in _schedule_rows(schedule, catalog):
            w.writerow([*key, var, dev, FLOAT_FMT % float(val)])


def read_schedule(path, catalog: DeviceCatalog, grid: TimeGrid) -> OperationSchedule:
    sched = OperationSchedule.zeros(catalog, grid)
    storage = {u.id: l for l, u in enumerate(catalog.storage)}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            y, d = int(row["year"]) - 1, int(row["day"]) - 1
            val = float(row["value"])
            var, dev = row["variable"], row["device"]
            if var == "water_shortfall":
                sched.water_shortfall[d, y] = val
                continue
            h = int(row["hour"]) - 1
            if var in ("load", "shed", "water"):
                getattr(sched, var)[h, d, y] = val
            elif var == "gen":
                sched.gen[dev][h, d, y] = val
            else:
                arr = {"charge": sched.ess_charge, "discharge": sched.ess_discharge, "soc": sched.soc}[var]
                arr[storage[dev], h, d, y] = val
    return sched


TRACE_COLUMNS = ("iteration", "lower_bound", "upper_bound", "gap", "master_objective",
                 "candidate_cost", "worst_operation_cost", "scenarios")


def write_trace(trace: list[dict], path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for rec in trace:
            w.writerow([rec[c] if isinstance(rec[c], int) else FLOAT_FMT % rec[c] for c in TRACE_COLUMNS])


def write_table(rows: list[dict], columns, path):
    """Tidy CSV; floats at 12 significant digits, missing cells empty."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            out = []
            for c in columns:
                v = r.get(c, "")
                out.append(FLOAT_FMT % v if isinstance(v, float) else v)
            w.writerow(out)


def emit_results(out_dir, *, catalog: DeviceCatalog, plan: InvestmentPlan | None = None,
                 schedule: OperationSchedule | None = None, costs: dict | None = None,
                 trace: list[dict] | None = None, realization: Realization | None = None,
                 manifest: dict | None = None) -> list[Path]:
    """Write the result files that apply; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if plan is not None:
        write_plan(plan, catalog, out / "plan.json")
        written.append(out / "plan.json")
    if schedule is not None:
        write_schedule(schedule, catalog, out / "schedule.csv")
        written.append(out / "schedule.csv")
    if costs is not None:
        _dump_json(costs, out / "costs.json")
        written.append(out / "costs.json")
    if trace is not None:
        write_trace(trace, out / "trace.csv")
        written.append(out / "trace.csv")
    if realization is not None:
        _dump_json(realization.to_dict(), out / "realization.json")
        written.append(out / "realization.json")
    if manifest is not None:
        _dump_json(manifest, out / "manifest.json")
        written.append(out / "manifest.json")
    return written
