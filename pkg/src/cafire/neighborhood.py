"""Wind-dependent dynamic neighborhoods and neighbor-state covariates.

Offsets are ``(dx, dy)`` pairs in cell units with +x east (increasing
column) and +y north (increasing row).  The base neighborhood is the Moore
set; a strong wind component adds cells at Chebyshev distance 2.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .grid import GridSpec, N_STATES, one_hot

MOORE_OFFSETS = tuple((dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dx, dy) != (0, 0))


class WindRecord(NamedTuple):
    u: float  # eastward, m/s
    v: float  # northward, m/s


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Neighborhood rule.

    ``side="upwind"`` places the extension cells on the side the wind blows
    from, so a south-westerly wind adds the three cells to the south-west of
    each cell.  ``side="downwind"`` mirrors them.
    """

    wind_threshold: float = 2.0
    side: str = "upwind"
    base_offsets: tuple = MOORE_OFFSETS

    def __post_init__(self):
        if self.wind_threshold <= 0:
            raise ConfigError("wind_threshold must be positive")
        if self.side not in ("upwind", "downwind"):
            raise ConfigError(f"side must be 'upwind' or 'downwind', got {self.side!r}")
        if (0, 0) in self.base_offsets:
            raise ConfigError("base offsets must exclude (0, 0)")


def as_winds(winds, T: int | None = None) -> np.ndarray:
    """Coerce a wind sequence to a ``(T, 2)`` float array of (u, v)."""
    if winds is None:
        if T is None:
            raise DataError("wind series length unknown")
        return np.zeros((T, 2))
    arr = np.asarray([tuple(w) for w in winds] if not isinstance(winds, np.ndarray) else winds, dtype=float)
    arr = arr.reshape(-1, 2)
    if not np.all(np.isfinite(arr)):
        raise DataError("wind components must be finite")
    if T is not None and arr.shape[0] != T:
        raise DataError(f"expected {T} wind records, got {arr.shape[0]}")
    return arr


def wind_offsets(wind, spec: NeighborhoodSpec | None = None) -> list[tuple[int, int]]:
    """Neighborhood offsets in effect under a single wind record."""
    spec = spec or NeighborhoodSpec()
    u, v = float(wind[0]), float(wind[1])
    offsets = list(spec.base_offsets)
    strong_u = abs(u) > spec.wind_threshold
    strong_v = abs(v) > spec.wind_threshold
    flip = -1 if spec.side == "upwind" else 1
    sx = flip * int(np.sign(u))
    sy = flip * int(np.sign(v))
    if strong_u and strong_v:
        offsets += [(2 * sx, 2 * sy), (2 * sx, sy), (sx, 2 * sy)]
    elif strong_u:
        offsets.append((2 * sx, 0))
    elif strong_v:
        offsets.append((0, 2 * sy))
    return offsets


def dynamic_neighbors(cell: int, wind, spec: NeighborhoodSpec | None, grid: GridSpec) -> set[int]:
    """Indices of the in-grid neighbors of ``cell`` under ``wind``."""
    row, col = grid.row_col(cell)
    out = set()
    for dx, dy in wind_offsets(wind, spec):
        r, c = row + dy, col + dx
        if 0 <= r < grid.ny and 0 <= c < grid.nx:
            out.add(int(r * grid.nx + c))
    return out


def _count(onehot_raster: np.ndarray, offsets) -> np.ndarray:
    # onehot_raster: (ny, nx, 3); zero padding drops out-of-grid neighbors
    ny, nx, _ = onehot_raster.shape
    pad = 2
    padded = np.zeros((ny + 2 * pad, nx + 2 * pad, N_STATES), dtype=np.int16)
    padded[pad:pad + ny, pad:pad + nx] = onehot_raster
    counts = np.zeros((ny, nx, N_STATES), dtype=np.int16)
    for dx, dy in offsets:
        counts += padded[pad + dy:pad + dy + ny, pad + dx:pad + dx + nx]
    return counts


def neighbor_counts(prev_states: np.ndarray, wind, spec: NeighborhoodSpec | None, grid: GridSpec) -> np.ndarray:
    """``(n, 3)`` counts of neighbors in each state, given the previous frame."""
    prev_states = np.asarray(prev_states)
    if prev_states.shape != (grid.n,):
        raise DataError(f"expected a state row of length {grid.n}, got shape {prev_states.shape}")
    oh = grid.to_raster(one_hot(prev_states).T).transpose(1, 2, 0)
    return _count(oh, wind_offsets(wind, spec)).reshape(grid.n, N_STATES).astype(float)


def build_covariates(states, t: int, winds, spec: NeighborhoodSpec | None, grid: GridSpec) -> np.ndarray:
    """Covariate matrix for frame ``t`` (0-based): neighbor counts in frame ``t - 1``.

    The neighborhood at ``t`` uses ``winds[t]``.
    """
    states = np.asarray(states)
    if t < 1:
        raise DataError("covariates need the previous frame; t must be >= 1")
    if t >= states.shape[0]:
        raise DataError(f"t={t} beyond the {states.shape[0]} available frames")
    winds = as_winds(winds, states.shape[0] if winds is None else None)
    if len(winds) <= t:
        raise DataError(f"no wind record for t={t}")
    return neighbor_counts(states[t - 1], winds[t], spec, grid)


def covariate_stack(states, winds, spec: NeighborhoodSpec | None, grid: GridSpec) -> np.ndarray:
    """Covariates for frames ``1..T-1`` stacked as ``(T - 1, n, 3)``."""
    states = np.asarray(states)
    winds = as_winds(winds, states.shape[0])
    return np.stack([neighbor_counts(states[t - 1], winds[t], spec, grid)
                     for t in range(1, states.shape[0])])


def covariates_long(X: np.ndarray) -> list[tuple[int, int, float, float, float]]:
    """Flatten a covariate stack to ``(t, cell, x1, x2, x3)`` rows for dumping."""
    return [(t + 1, i, *map(float, X[t, i])) for t in range(X.shape[0]) for i in range(X.shape[1])]
