"""Spatial lattice, temperature rasters and three-state fire classification.

Cells are indexed row-major from the south-west corner: row 0 is the
southern-most row, column 0 the western-most column, and cell
``i = row * nx + col``.  A state field is a ``(T, n)`` integer array with
entries 1 (unburnt), 2 (burning) and 3 (burnt).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DataError, DimensionError

UNBURNT, BURNING, BURNT = 1, 2, 3
STATES = (UNBURNT, BURNING, BURNT)
N_STATES = 3


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise DimensionError(f"grid must have nx, ny >= 1, got ({self.nx}, {self.ny})")

    @property
    def n(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape ``(ny, nx)`` of a raster on this grid."""
        return (self.ny, self.nx)

    def cell_index(self, row, col):
        row = np.asarray(row)
        col = np.asarray(col)
        if np.any((row < 0) | (row >= self.ny) | (col < 0) | (col >= self.nx)):
            raise IndexError(f"(row, col) outside {self.ny}x{self.nx} grid")
        return row * self.nx + col

    def row_col(self, index):
        index = np.asarray(index)
        if np.any((index < 0) | (index >= self.n)):
            raise IndexError(f"cell index outside [0, {self.n})")
        return index // self.nx, index % self.nx

    def to_raster(self, flat: np.ndarray) -> np.ndarray:
        """Reshape ``(..., n)`` cell vectors to ``(..., ny, nx)`` rasters."""
        flat = np.asarray(flat)
        return flat.reshape(flat.shape[:-1] + self.shape)

    def to_cells(self, raster: np.ndarray) -> np.ndarray:
        raster = np.asarray(raster)
        if raster.shape[-2:] != self.shape:
            raise DimensionError(f"raster shape {raster.shape[-2:]} does not match grid {self.shape}")
        return raster.reshape(raster.shape[:-2] + (self.n,))


@dataclass(frozen=True)
class TemperatureRaster:
    """Kelvin temperatures with shape ``(T, ny, nx)`` and a time index."""

    values: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 2:
            values = values[None]
        if values.ndim != 3:
            raise DimensionError(f"raster values must be (T, ny, nx), got shape {values.shape}")
        times = np.arange(values.shape[0]) if self.times is None else np.asarray(self.times)
        if times.shape != (values.shape[0],):
            raise DimensionError("one time stamp per frame is required")
        if np.any(np.diff(times) <= 0):
            raise DataError("time index must be strictly increasing")
        if not np.all(values > 0):
            raise DataError("temperatures must be positive Kelvin values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "times", times)

    @classmethod
    def from_array(cls, values, times=None) -> "TemperatureRaster":
        return cls(values, times)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(nx=self.values.shape[2], ny=self.values.shape[1])

    def cells(self) -> np.ndarray:
        """Temperatures as a ``(T, n)`` matrix in cell-index order."""
        return self.values.reshape(self.values.shape[0], -1)


@dataclass(frozen=True)
class ClassifierConfig:
    """Thresholds for temperature-to-state classification.

    The ignition threshold is an analyst choice (an offset above the
    background, default 100 K); a cell is burnt once a burning cell drops to
    ``extinction_temp`` or below.
    """

    background_temp: float = 300.0
    ignition_threshold: float = 100.0
    extinction_temp: float = 300.0

    def __post_init__(self):
        if self.ignition_threshold <= 0:
            raise DataError("ignition_threshold must be positive")
        if self.extinction_temp < self.background_temp:
            raise DataError("extinction_temp must be >= background_temp")


def coarsen_raster(fine: TemperatureRaster, factor_x: int, factor_y: int) -> TemperatureRaster:
    """Block-average a raster by integer factors along x (columns) and y (rows)."""
    T, ny, nx = fine.values.shape
    if factor_x < 1 or nx % factor_x:
        raise DimensionError(f"x axis: width {nx} is not divisible by factor {factor_x}")
    if factor_y < 1 or ny % factor_y:
        raise DimensionError(f"y axis: height {ny} is not divisible by factor {factor_y}")
    blocks = fine.values.reshape(T, ny // factor_y, factor_y, nx // factor_x, factor_x)
    return TemperatureRaster(blocks.mean(axis=(2, 4)), fine.times.copy())


def classify_states(raster, cfg: ClassifierConfig | None = None) -> np.ndarray:
    """Classify a temperature history into monotone fire states.

    Accepts a :class:`TemperatureRaster` or an array whose first axis is
    time; the returned array has the same shape with the spatial axes
    flattened when a raster is given.
    """
    cfg = cfg or ClassifierConfig()
    temps = raster.cells() if isinstance(raster, TemperatureRaster) else np.asarray(raster, dtype=float)
    if temps.size == 0:
        raise DataError("cannot classify an empty raster")
    ignite_at = cfg.background_temp + cfg.ignition_threshold
    states = np.empty(temps.shape, dtype=np.int8)
    current = np.full(temps.shape[1:], UNBURNT, dtype=np.int8)
    for t in range(temps.shape[0]):
        frame = temps[t]
        # a burning cell is tested for extinction before new ignitions are
        # applied, so a cell cannot ignite and burn out within one frame
        current = np.where((current == BURNING) & (frame <= cfg.extinction_temp), BURNT, current)
        current = np.where((current == UNBURNT) & (frame >= ignite_at), BURNING, current)
        states[t] = current
    return states


class Violation(NamedTuple):
    cell: int
    time: int
    reason: str


def validate_statefield(states) -> list[Violation]:
    """Return range and monotonicity violations of a ``(T, n)`` state field."""
    states = np.asarray(states)
    if states.ndim == 1:
        states = states[None]
    out = []
    bad = ~np.isin(states, STATES)
    for t, i in zip(*np.nonzero(bad)):
        out.append(Violation(int(i), int(t), f"state {states[t, i]} outside {{1, 2, 3}}"))
    drops = np.diff(states.astype(int), axis=0) < 0
    for t, i in zip(*np.nonzero(drops)):
        out.append(Violation(int(i), int(t) + 1,
                             f"reversal {states[t, i]} -> {states[t + 1, i]}"))
    out.sort(key=lambda v: (v.time, v.cell))
    return out


def one_hot(states: np.ndarray) -> np.ndarray:
    """Indicator array with a trailing axis of length 3 (state j at index j-1)."""
    states = np.asarray(states)
    return (states[..., None] == np.arange(1, N_STATES + 1)).astype(np.int16)


def monotone_collapse(probs: np.ndarray, prev_states: np.ndarray) -> np.ndarray:
    """Fold probability of states below each cell's previous state into that state.

    ``probs`` has a trailing axis of length 3; ``prev_states`` broadcasts
    against the leading axes.  Burnt cells end up burnt with probability 1.
    """
    probs = np.asarray(probs, dtype=float)
    prev = np.asarray(prev_states)[..., None]
    j = np.arange(1, N_STATES + 1)
    cum = np.cumsum(probs, axis=-1)
    out = np.where(j < prev, 0.0, probs)
    at_prev = np.take_along_axis(cum, prev.astype(int) - 1, axis=-1)
    return np.where(j == prev, at_prev, out)
