"""Tidal barrage output from tidal height, and peak-delay scenarios."""

from __future__ import annotations

import numpy as np

from .core import EconomicParams, ForecastSet, TidalUnit

MAX_DELAY = 4
SECONDS_PER_HOUR = 3600.0
W_PER_MW = 1e6


def tidal_power(height, unit: TidalUnit, econ: EconomicParams, cap: bool = True):
    """Barrage output in MW for tidal height(s) in metres.

    ``0.5 * rho * g * height**2 * area * efficiency / 3600`` gives watts for
    SI inputs; the result is converted to MW and, when ``cap`` is set,
    clipped at the unit's rated power.
    """
    h = np.asarray(height, dtype=float)
    if np.any(h < 0):
        raise ValueError("tidal height must be >= 0")
    p = 0.5 * econ.sea_density * econ.gravity * h ** 2 * unit.area * unit.efficiency
    p = p / SECONDS_PER_HOUR / W_PER_MW
    if cap:
        p = np.minimum(p, unit.rated_power)
    return float(p) if np.ndim(p) == 0 else p


def apply_delay(series, delta_t: int):
    """Shift an hourly series within each day, zero-filling vacated hours.

    ``series`` has hours on axis 0 (any trailing day/year axes are shifted
    independently). ``delta_t > 0`` moves the peaks earlier by that many
    hours; ``delta_t < 0`` moves them later.
    """
    if int(delta_t) != delta_t:
        raise ValueError(f"delta_t must be a whole number of hours (got {delta_t})")
    delta_t = int(delta_t)
    if abs(delta_t) > MAX_DELAY:
        raise ValueError(f"|delta_t| must be <= {MAX_DELAY} h (got {delta_t})")
    s = np.asarray(series, dtype=float)
    out = np.zeros_like(s)
    n = s.shape[0]
    if delta_t == 0:
        out[...] = s
    elif abs(delta_t) < n:
        if delta_t > 0:
            out[: n - delta_t] = s[delta_t:]
        else:
            out[-delta_t:] = s[: n + delta_t]
    return out


def nominal_tpg_profile(forecasts: ForecastSet, units, delta_t: int, econ: EconomicParams,
                        cap: bool = True) -> np.ndarray:
    """Nominal generation (K, H, D, Y) of each tidal unit under delay ``delta_t``."""
    heights = apply_delay(forecasts.tidal_height, delta_t)
    shp = forecasts.tidal_height.shape
    out = np.zeros((len(units), *shp))
    for k, u in enumerate(units):
        out[k] = tidal_power(heights, u, econ, cap=cap)
    return out
