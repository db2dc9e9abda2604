"""Reference instance built from the published candidate-device tables.

The device data (six diesel units, two renewables, three storage units,
four tidal units, the desalination unit) are the published values. The
hourly series are synthetic: the original forecasts were never released.
Choices that are not published are made here and listed in
``REFERENCE_ASSUMPTIONS``.
"""

from __future__ import annotations

import numpy as np

from .core import (DesalinationUnit, DeviceCatalog, DispatchableUnit, EconomicParams, ForecastSet,
                   Instance, RenewableUnit, StorageUnit, TidalUnit, TimeGrid)

# (id, MW, $/MWh, $/MW)
DU_TABLE = [("DU1", 6, 140, 44_000), ("DU2", 5, 130, 54_000), ("DU3", 4, 120, 64_000),
            ("DU4", 3, 110, 74_000), ("DU5", 2, 100, 84_000), ("DU6", 1, 90, 94_000)]
# (id, MW, $/MW, kind)
NDU_TABLE = [("WT1", 4, 150_000, "wind"), ("PV1", 2, 90_000, "solar")]
# (id, MW, MWh, $/MW, $/MWh)
ESS_TABLE = [("ESS1", 1, 6, 60_000, 30_000), ("ESS2", 2, 6, 30_000, 30_000),
             ("ESS3", 3, 6, 20_000, 30_000)]
# (id, MW, $/MW)
TPG_TABLE = [("TPG1", 5, 54_000), ("TPG2", 4, 72_000), ("TPG3", 3, 90_000), ("TPG4", 2, 108_000)]

REFERENCE_ASSUMPTIONS = {
    "discount_rate": 0.05,
    "shed_penalty_usd_per_mwh": 1e6,
    "sea_density_kg_m3": 1025.0,
    "gravity_m_s2": 9.81,
    "tidal_efficiency": 0.9,
    "tidal_area_m2_per_mw": 50_000.0,
    "storage_efficiency": 0.9,
    "day_weight": 365.0,
}


def reference_catalog(area_per_mw: float = 50_000.0, tidal_efficiency: float = 0.9,
                      slot_hours: float = 1.0) -> DeviceCatalog:
    """Candidate devices; ``slot_hours`` rescales energy data for multi-hour slots.

    The dispatch model counts one slot as one hour. A slot of ``slot_hours``
    hours is represented exactly by expressing storage energy and daily water
    demand in MW-slots and t/h-slots (divide by ``slot_hours``) and the
    $/MWh storage price per MW-slot (multiply), so investment costs do not
    change. Operating costs are rescaled through the day weight.
    """
    s = float(slot_hours)
    return DeviceCatalog(
        dispatchable=[DispatchableUnit(i, p, c, cc) for i, p, c, cc in DU_TABLE],
        renewable=[RenewableUnit(i, p, cc, kind) for i, p, cc, kind in NDU_TABLE],
        tidal=[TidalUnit(i, p, cc, area=area_per_mw * p, efficiency=tidal_efficiency)
               for i, p, cc in TPG_TABLE],
        storage=[StorageUnit(i, p, e / s, cp, ce * s, efficiency=0.9) for i, p, e, cp, ce in ESS_TABLE],
        # 450 t/h, 1.8 M$/yr, 1 $/t, 3 kW per t, 9000 t/day
        desalination=DesalinationUnit(450.0, 1.8e6, 1.0, 0.003, 9000.0 / s),
    )


def semidiurnal_tide(hours: int = 24, days: int = 1, mean: float = 2.0, amplitude: float = 2.0,
                     first_peak: float = 7.0, period: float = 12.42) -> np.ndarray:
    """Tidal height (m) with two highs per day, the first near ``first_peak`` o'clock.

    ``hours`` is the number of samples per day; clock time advances by
    ``24 / hours`` per sample.
    """
    t = np.arange(hours * days, dtype=float) * 24.0 / hours
    h = mean + amplitude * np.cos(2 * np.pi * (t - first_peak) / period)
    return np.clip(h, 0.0, None).reshape(days, hours).T


def diurnal_load(hours: int = 24, base: float = 8.0, peak: float = 14.0) -> np.ndarray:
    """Island load (MW): night trough, late-morning shoulder and an evening peak."""
    t = np.arange(hours, dtype=float) * 24.0 / hours
    shape = (0.55 * np.exp(-0.5 * ((t - 11.0) / 3.0) ** 2)
             + 1.0 * np.exp(-0.5 * ((t - 19.5) / 2.2) ** 2))
    shape = shape / shape.max()
    return base + (peak - base) * shape


def solar_profile(hours: int = 24, rated: float = 2.0) -> np.ndarray:
    t = np.arange(hours, dtype=float) * 24.0 / hours
    return rated * np.clip(np.sin(np.pi * (t - 6.0) / 12.0), 0.0, None)


def wind_profile(hours: int = 24, rated: float = 4.0) -> np.ndarray:
    t = np.arange(hours, dtype=float) * 24.0 / hours
    return rated * (0.45 + 0.25 * np.cos(2 * np.pi * (t - 3.0) / 24.0))


def _block_mean(series: np.ndarray, slots: int) -> np.ndarray:
    return series.reshape(slots, -1).mean(axis=1)


def reference_forecasts(catalog: DeviceCatalog, hours: int = 24) -> ForecastSet:
    """Hourly synthetic series averaged into ``hours`` equal slots per day."""
    if 24 % hours:
        raise ValueError(f"hours per day must divide 24 (got {hours})")
    load = _block_mean(diurnal_load(24), hours)[:, None, None]
    tide = _block_mean(semidiurnal_tide(24)[:, 0], hours)[:, None, None]
    avail = []
    for u in catalog.renewable:
        prof = solar_profile(24, u.rated_power) if u.kind == "solar" else wind_profile(24, u.rated_power)
        avail.append(_block_mean(prof, hours)[:, None, None])
    avail = np.array(avail) if avail else np.zeros((0, hours, 1, 1))
    return ForecastSet(np.round(load, 6), np.round(avail, 6), np.round(tide, 6))


def reference_instance(hours: int = 24, **kw) -> Instance:
    """Single representative day weighted to a year, one-year horizon.

    ``hours`` is the number of equal slots per day (a divisor of 24). Tidal
    delays on such an instance count slots, not hours.
    """
    slot = 24 // hours
    cat = reference_catalog(slot_hours=slot)
    grid = TimeGrid(hours, 1, 1, day_weight=REFERENCE_ASSUMPTIONS["day_weight"] * slot)
    econ = EconomicParams(discount_rate=REFERENCE_ASSUMPTIONS["discount_rate"],
                          shed_penalty=REFERENCE_ASSUMPTIONS["shed_penalty_usd_per_mwh"])
    return Instance(cat, reference_forecasts(cat, hours), grid, econ, **kw)


EXAMPLE_HOURS = 6


def write_example_inputs(out_dir, hours: int = EXAMPLE_HOURS) -> dict:
    """Write the reference instance as a run config plus catalog and forecast files.

    Returns the run config dictionary. The bundled example in ``omplan/data``
    is produced by this function.
    """
    import json
    from pathlib import Path

    from .io import catalog_to_dict, write_forecasts

    inst = reference_instance(hours)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "catalog.json").write_text(json.dumps(catalog_to_dict(inst.catalog), indent=2) + "\n")
    write_forecasts(inst.forecasts, inst.catalog, out / "forecasts.csv")
    g, e = inst.grid, inst.econ
    run = {
        "catalog": "catalog.json",
        "forecasts": "forecasts.csv",
        "grid": {"hours_per_day": g.hours_per_day, "days": g.days, "years": g.years,
                 "day_weight": g.day_weight},
        "economics": {"discount_rate": e.discount_rate, "shed_penalty": e.shed_penalty,
                      "sea_density": e.sea_density, "gravity": e.gravity},
        "instance": {"ndu_mode": inst.ndu_mode, "cap_tidal": inst.cap_tidal,
                     "enforce_adequacy": inst.enforce_adequacy},
        "uncertainty": {"beta_load": 0.5, "beta_tpg": 0.5, "gamma_load": 0.5, "gamma_tpg": 0.5,
                        "delta_t": 0, "tpg_budget": "shared"},
        "solver": {"rel_gap": 1e-6, "seed": 0},
        "ccg": {"eps": 1e-4, "max_iter": 50, "method": "dual"},
        "sweep": {"job": "rpm", "axes": {"gamma": [0.0, 0.25, 0.5]}},
    }
    (out / "run.json").write_text(json.dumps(run, indent=2) + "\n")
    return run
