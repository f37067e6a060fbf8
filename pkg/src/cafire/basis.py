"""Spatial basis matrices: constructed EOFs and bisquare functions."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DimensionError
from .grid import GridSpec
from .neighborhood import NeighborhoodSpec, as_winds
from .simulator import fit_fsim, forward_most_probable, gsim_impute, temperature_pools


class RankError(DimensionError):
    pass


@dataclass
class BasisMatrix:
    H: np.ndarray
    kind: str
    singular_values: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def r(self) -> int:
        return self.H.shape[1]

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def explained_variance(self) -> np.ndarray | None:
        """Fraction of total variance carried by each retained pattern."""
        if self.singular_values is None:
            return None
        total = self.meta.get("total_variance")
        s2 = self.singular_values[: self.r] ** 2
        return s2 / total if total else s2 / s2.sum()


def compute_eofs(field: np.ndarray, r: int, rtol: float = 1e-10) -> BasisMatrix:
    """Leading ``r`` spatial EOFs of a ``(times, n)`` field.

    Each cell's temporal mean is removed first.  Columns are ordered by
    decreasing singular value and signed so that their largest-magnitude
    entry is positive.
    """
    field = np.asarray(field, dtype=float)
    if field.ndim != 2:
        raise DimensionError("field must be a (times, n) matrix")
    rows, n = field.shape
    if r < 1 or r > min(n, rows):
        raise RankError(f"rank {r} outside [1, min(n={n}, times={rows})]")
    anomalies = field - field.mean(axis=0)
    _, s, vt = np.linalg.svd(anomalies, full_matrices=False)
    if s[0] == 0 or s[r - 1] <= rtol * s[0]:
        raise RankError(f"field has fewer than {r} non-degenerate patterns")
    H = vt[:r].T.copy()
    pivots = np.argmax(np.abs(H), axis=0)
    H *= np.sign(H[pivots, np.arange(r)])
    return BasisMatrix(H, "eof", singular_values=s, meta={"total_variance": float((s ** 2).sum())})


def construct_eofs(states, temps, tau: int, r: int, winds, spec: NeighborhoodSpec | None,
                   grid: GridSpec, seed=None, forecast_winds=None) -> BasisMatrix:
    """EOFs of the observed temperatures extended by ``tau`` simulated frames.

    The extension runs the neighbor-count multinomial model forward from the
    last observed frame (most probable state per cell) and imputes each
    simulated cell's temperature from the training temperatures of its
    state.  ``forecast_winds`` defaults to persistence of the last record.
    """
    states = np.asarray(states)
    temps = np.asarray(temps, dtype=float)
    if states.shape[0] < 2:
        raise DataError("constructed EOFs need at least two observed frames")
    winds = as_winds(winds, states.shape[0])
    frames = [temps]
    if tau > 0:
        if forecast_winds is None:
            forecast_winds = np.repeat(winds[-1:], tau, axis=0)
        model = fit_fsim(states, winds, spec, grid)
        future = forward_most_probable(model, states[-1], tau, forecast_winds, spec, grid)
        frames.append(gsim_impute(future, temperature_pools(states, temps), seed))
    basis = compute_eofs(np.concatenate(frames), r)
    basis.kind = "eof"
    basis.meta.update(tau=int(tau), seed=seed)
    return basis


def regular_knots(grid: GridSpec, kx: int, ky: int) -> np.ndarray:
    """A ``kx`` by ``ky`` lattice of knots ``(x, y)`` centred in equal grid blocks."""
    xs = (np.arange(kx) + 0.5) * grid.nx / kx - 0.5
    ys = (np.arange(ky) + 0.5) * grid.ny / ky - 0.5
    return np.array([(x, y) for y in ys for x in xs])


def bisquare_basis(grid: GridSpec, knots, bandwidth: float | None = None) -> BasisMatrix:
    """Bisquare functions ``(1 - (d / w)^2)^2`` for ``d < w`` centred on ``knots``.

    Knots are ``(x, y)`` in cell units (column, row).  The default bandwidth
    is 1.5 times the smallest spacing between distinct knot coordinates.
    """
    knots = np.atleast_2d(np.asarray(knots, dtype=float))
    if knots.size == 0:
        raise DataError("at least one knot is required")
    if bandwidth is None:
        bandwidth = 1.5 * _knot_spacing(knots)
    if bandwidth <= 0:
        raise DataError("bandwidth must be positive")
    outside = ((knots[:, 0] < 0) | (knots[:, 0] > grid.nx - 1) |
               (knots[:, 1] < 0) | (knots[:, 1] > grid.ny - 1))
    if outside.any():
        warnings.warn(f"{int(outside.sum())} knot(s) lie outside the grid", stacklevel=2)
    rows, cols = grid.row_col(np.arange(grid.n))
    d = np.hypot(cols[:, None] - knots[None, :, 0], rows[:, None] - knots[None, :, 1])
    H = np.where(d < bandwidth, (1 - (d / bandwidth) ** 2) ** 2, 0.0)
    return BasisMatrix(H, "bisquare", meta={"bandwidth": float(bandwidth), "knots": knots.tolist()})


def _knot_spacing(knots: np.ndarray) -> float:
    gaps = []
    for axis in (0, 1):
        u = np.unique(knots[:, axis])
        if u.size > 1:
            gaps.append(np.diff(u).min())
    if not gaps:
        raise DataError("cannot infer a bandwidth from a single knot; pass one explicitly")
    return float(min(gaps))
