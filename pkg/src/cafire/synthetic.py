"""Reproducible synthetic fires: the neighbor-rule experiment and a ridge burn with temperatures."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import BURNING, BURNT, UNBURNT, GridSpec, TemperatureRaster
from .neighborhood import NeighborhoodSpec, neighbor_counts
from .simulator import REFERENCE_BETA, REFERENCE_CUTPOINT, RuleTable, SimConfig, simulate_fire

# Ignition probabilities by (n_unburnt, n_burning) for Moore neighborhoods
# without burnt neighbors.
REFERENCE_IGNITION = {
    (0, 8): 1.0000, (1, 7): 1.0000, (2, 6): 0.9999, (3, 5): 0.9994, (4, 4): 0.9641,
    (5, 3): 0.6368, (6, 2): 0.1357, (7, 1): 0.0054, (8, 0): 3.167e-05,
}


def intermittent_wind(T: int, speed: float = 3.0, period: int = 8, on: int = 4) -> np.ndarray:
    """Northward wind of ``speed`` m/s for ``on`` of every ``period`` steps, calm otherwise."""
    winds = np.zeros((T, 2))
    winds[(np.arange(T) % period) >= period - on, 1] = speed
    return winds


def corner_ignition(grid: GridSpec, size: int = 2) -> np.ndarray:
    state = np.full(grid.n, UNBURNT, dtype=np.int8)
    rows, cols = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    state[grid.cell_index(rows.ravel(), cols.ravel())] = BURNING
    return state


@dataclass
class Scenario:
    grid: GridSpec
    states: np.ndarray
    winds: np.ndarray
    spec: NeighborhoodSpec
    temps: np.ndarray | None = None
    rules: RuleTable | None = None
    latent: np.ndarray | None = None


def neighbor_rule_experiment(seed: int = 0, T: int = 45, nx: int = 30, ny: int = 20) -> Scenario:
    """20 x 30 cells, 45 frames, ordinal-probit neighbor rules and intermittent +y wind."""
    grid = GridSpec(nx=nx, ny=ny)
    winds = intermittent_wind(T)
    spec = NeighborhoodSpec()
    rules = RuleTable.ordinal_probit(REFERENCE_BETA, REFERENCE_CUTPOINT)
    cfg = SimConfig(grid, T, corner_ignition(grid), winds, seed, spec)
    return Scenario(grid, simulate_fire(rules, cfg), winds, spec, rules=rules)


def burn_temperatures(states: np.ndarray, rng, background: float = 300.0, peak: float = 600.0,
                      cooling: float = 4.0) -> np.ndarray:
    """Kelvin temperatures consistent with a state history.

    Unburnt cells sit near background, burning cells cool from
    ``background + peak`` with the time since ignition, burnt cells sit at
    or just below background.
    """
    T, n = states.shape
    temps = np.empty((T, n))
    age = np.zeros(n)
    for t in range(T):
        s = states[t]
        age = np.where(s == BURNING, age + 1, 0)
        unburnt = background + np.clip(rng.normal(0.0, 2.0, n), -6, 6)
        burning = background + 5.0 + peak * np.exp(-(age - 1) / cooling) * rng.uniform(0.8, 1.2, n)
        burnt = background - rng.uniform(0.0, 5.0, n)
        temps[t] = np.select([s == UNBURNT, s == BURNING, s == BURNT], [unburnt, burning, burnt])
    return temps


RIDGE_BETA = (-0.6, 0.8, 1.3)


def ridge_burn(seed: int = 0, T: int = 49, nx: int = 32, ny: int = 24, beta=RIDGE_BETA,
               cutpoint: float = REFERENCE_CUTPOINT, amplitude: float = 1.5, wavelength: float = 0.5,
               drift: float = 0.0, wind_mean: float = 1.5) -> Scenario:
    """Synthetic burn on a 24 x 32 grid driven by neighbors plus a latent fuel field.

    The latent field is a set of stripes of alternating fast and slow fuel
    running along the south-west to north-east diagonal, so the front
    develops fingers that the neighbor counts alone cannot explain.  The
    stripes shift across the diagonal by ``drift`` wavelengths per step.
    States follow ``max(previous, cut(X beta + latent + eps))``;
    temperatures are generated from the state history.
    """
    rng = np.random.default_rng(seed)
    grid = GridSpec(nx=nx, ny=ny)
    spec = NeighborhoodSpec()
    winds = np.zeros((T, 2))
    winds[:, 0] = wind_mean + rng.normal(0, 1.0, T)
    winds[:, 1] = wind_mean + rng.normal(0, 1.0, T)
    rows, cols = grid.row_col(np.arange(grid.n))
    across = (cols / (nx - 1) - rows / (ny - 1)) / 2  # -0.5 .. 0.5 across the diagonal
    states = np.empty((T, grid.n), dtype=np.int8)
    states[0] = corner_ignition(grid, 3)
    beta = np.asarray(beta, dtype=float)
    phase = rng.uniform(0, 2 * np.pi)
    latents = np.zeros((T, grid.n))
    for t in range(1, T):
        phase += 2 * np.pi * drift
        latents[t] = amplitude * np.cos(2 * np.pi * across / wavelength + phase)
        mu = neighbor_counts(states[t - 1], winds[t], spec, grid) @ beta + latents[t]
        z = mu + rng.standard_normal(grid.n)
        level = 1 + (z > 0) + (z > cutpoint)
        states[t] = np.maximum(states[t - 1], level)
    temps = burn_temperatures(states, rng)
    return Scenario(grid, states, winds, spec, temps=temps, latent=latents)


def temperature_raster(scn: Scenario) -> TemperatureRaster:
    return TemperatureRaster(scn.grid.to_raster(scn.temps), np.arange(scn.temps.shape[0]))
