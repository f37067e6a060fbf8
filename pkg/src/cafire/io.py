"""Delimited-text persistence for state fields, rasters, winds, bases, posteriors, forecasts and scores.

Every table is comma-delimited with a single header line.  Floats are
written with 17 significant digits so that write, read, write reproduces the
same bytes.  Files are written to a temporary sibling and renamed into
place.
"""
from __future__ import annotations

import csv
import io as _io
import json
import os
from pathlib import Path

import numpy as np

from .basis import BasisMatrix
from .errors import DataError
from .forecast import ForecastDistribution
from .grid import N_STATES, STATES, GridSpec, TemperatureRaster, validate_statefield
from .inference import PosteriorSamples
from .verification import ScoreReport


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if np.isnan(x):
        return "nan"
    return format(x, ".17g")


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
    return path


def write_table(path, header, rows, preamble: str | None = None) -> Path:
    buf = _io.StringIO()
    if preamble:
        buf.write(preamble.rstrip("\n") + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return atomic_write_text(path, buf.getvalue())


def read_table(path, expected=None) -> tuple[list[str], list[list[str]], list[str]]:
    """Return ``(header, rows, comment_lines)``; lines starting with ``#`` before the header are comments."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    comments = []
    while lines and lines[0].startswith("#"):
        comments.append(lines.pop(0)[1:].strip())
    if not lines:
        raise DataError(f"{path}: missing header line")
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader)]
    if expected is not None and header[: len(expected)] != list(expected):
        raise DataError(f"{path}: expected columns {list(expected)}, found {header}")
    rows = [r for r in reader if r]
    for k, r in enumerate(rows):
        if len(r) != len(header):
            raise DataError(f"{path}: line {k + 2} has {len(r)} fields, header has {len(header)}")
    return header, rows, comments


def _numeric(path, rows, dtype=float) -> np.ndarray:
    try:
        return np.array(rows, dtype=float).astype(dtype) if rows else np.zeros((0, 0), dtype=dtype)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric entry ({exc})") from None


# state fields -------------------------------------------------------------

def write_statefield(path, states) -> Path:
    states = np.asarray(states)
    if states.ndim != 2:
        raise DataError("state field must be (T, n)")
    T, n = states.shape
    rows = ((t, i, int(states[t, i])) for t in range(T) for i in range(n))
    return write_table(path, ["t", "cell_index", "state"], rows)


def read_statefield(path, n: int | None = None, validate: bool = True) -> np.ndarray:
    """Read a long ``(t, cell_index, state)`` table into a ``(T, n)`` int8 array."""
    _, rows, _ = read_table(path, ["t", "cell_index", "state"])
    a = _numeric(path, rows, int)
    if a.size == 0:
        raise DataError(f"{path}: no records")
    T = int(a[:, 0].max()) + 1
    n = int(a[:, 1].max()) + 1 if n is None else n
    if a[:, 0].min() < 0 or a[:, 1].min() < 0 or a[:, 1].max() >= n:
        raise DataError(f"{path}: time or cell index out of range")
    out = np.zeros((T, n), dtype=np.int8)
    seen = np.zeros((T, n), dtype=bool)
    out[a[:, 0], a[:, 1]] = a[:, 2]
    seen[a[:, 0], a[:, 1]] = True
    if len(a) != T * n or not seen.all():
        raise DataError(f"{path}: expected one record per (t, cell) for {T} x {n}")
    if validate:
        bad = validate_statefield(out)
        if bad:
            v = bad[0]
            raise DataError(f"{path}: cell {v.cell} at t={v.time}: {v.reason} ({len(bad)} violation(s))")
    return out


# temperatures -------------------------------------------------------------

def write_raster_long(path, raster: TemperatureRaster) -> Path:
    T, ny, nx = raster.values.shape
    rows = ((int(raster.times[t]), r, c, raster.values[t, r, c])
            for t in range(T) for r in range(ny) for c in range(nx))
    return write_table(path, ["t", "row", "col", "temp"], rows)


def read_raster_long(path, grid: GridSpec | None = None) -> TemperatureRaster:
    _, rows, _ = read_table(path, ["t", "row", "col", "temp"])
    a = _numeric(path, rows)
    if a.size == 0:
        raise DataError(f"{path}: no records")
    times = np.unique(a[:, 0]).astype(int)
    ny = grid.ny if grid else int(a[:, 1].max()) + 1
    nx = grid.nx if grid else int(a[:, 2].max()) + 1
    if len(a) != len(times) * ny * nx:
        raise DataError(f"{path}: expected {len(times) * ny * nx} records, found {len(a)}")
    t_idx = np.searchsorted(times, a[:, 0].astype(int))
    r, c = a[:, 1].astype(int), a[:, 2].astype(int)
    if r.min() < 0 or c.min() < 0 or r.max() >= ny or c.max() >= nx:
        raise DataError(f"{path}: row or column outside the {ny}x{nx} grid")
    values = np.full((len(times), ny, nx), np.nan)
    values[t_idx, r, c] = a[:, 3]
    if np.isnan(values).any():
        raise DataError(f"{path}: missing (t, row, col) records")
    return TemperatureRaster(values, times)


def write_grid_text(path, frame: np.ndarray) -> Path:
    """One raster frame, ``ny`` lines of ``nx`` values; the first data line is row 0 (south)."""
    frame = np.asarray(frame)
    return write_table(path, [f"x{c}" for c in range(frame.shape[1])], frame.tolist())


def read_grid_text(path) -> np.ndarray:
    _, rows, _ = read_table(path)
    return _numeric(path, rows)


def read_raster_manifest(path) -> TemperatureRaster:
    """Read a ``(t, file)`` manifest of per-frame grid files, paths relative to the manifest."""
    path = Path(path)
    _, rows, _ = read_table(path, ["t", "file"])
    if not rows:
        raise DataError(f"{path}: manifest lists no frames")
    times = np.array([int(r[0]) for r in rows])
    frames = [read_grid_text(path.parent / r[1]) for r in rows]
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise DataError(f"{path}: frames have differing shapes {sorted(shapes)}")
    return TemperatureRaster(np.stack(frames), times)


def read_temperatures(path, grid: GridSpec | None = None) -> TemperatureRaster:
    """Dispatch on the header: a long ``(t, row, col, temp)`` table or a ``(t, file)`` manifest."""
    header, _, _ = read_table(path)
    if header[:2] == ["t", "file"]:
        raster = read_raster_manifest(path)
        if grid is not None and raster.grid != grid:
            raise DataError(f"{path}: raster grid {raster.grid} does not match {grid}")
        return raster
    return read_raster_long(path, grid)


# winds ----------------------------------------------------------------------

def write_winds(path, winds) -> Path:
    winds = np.asarray(winds, dtype=float).reshape(-1, 2)
    return write_table(path, ["t", "u", "v"], ((t, u, v) for t, (u, v) in enumerate(winds)))


def read_winds(path) -> np.ndarray:
    _, rows, _ = read_table(path, ["t", "u", "v"])
    a = _numeric(path, rows)
    if a.size == 0:
        raise DataError(f"{path}: no records")
    if not np.array_equal(a[:, 0], np.arange(len(a))):
        raise DataError(f"{path}: wind records must be listed for t = 0, 1, 2, ... in order")
    return a[:, 1:3].copy()


# bases ----------------------------------------------------------------------

def write_basis(path, basis: BasisMatrix) -> Path:
    seed = basis.meta.get("seed")
    pre = f"# kind={basis.kind},r={basis.r},seed={'none' if seed is None else seed}"
    return write_table(path, [f"h{k + 1}" for k in range(basis.r)], basis.H.tolist(), preamble=pre)


def read_basis(path) -> BasisMatrix:
    header, rows, comments = read_table(path)
    meta = {}
    for c in comments:
        for item in c.split(","):
            if "=" in item:
                k, v = item.split("=", 1)
                meta[k.strip()] = v.strip()
    H = _numeric(path, rows)
    if H.ndim != 2 or H.shape[1] != len(header):
        raise DataError(f"{path}: malformed basis matrix")
    if "r" in meta and int(meta["r"]) != H.shape[1]:
        raise DataError(f"{path}: header says r={meta['r']} but there are {H.shape[1]} columns")
    seed = meta.get("seed", "none")
    return BasisMatrix(H, meta.get("kind", "eof"), meta={"seed": None if seed == "none" else int(seed)})


# posterior ------------------------------------------------------------------

_BLOCKS = ("beta", "cutpoint", "M", "Q", "Y")


def _block_columns(name: str, shape: tuple) -> list[str]:
    if not shape:
        return [name]
    idx = np.indices(shape).reshape(len(shape), -1).T
    return [f"{name}[{','.join(str(i) for i in ix)}]" for ix in idx]


def write_posterior(directory, post: PosteriorSamples) -> list[Path]:
    """One ``<block>.csv`` per parameter block (draw index plus flattened values) and ``posterior.json``."""
    directory = Path(directory)
    out = []
    for name in _BLOCKS:
        arr = getattr(post, name)
        flat = arr.reshape(len(post), -1)
        cols = _block_columns(name, arr.shape[1:])
        out.append(write_table(directory / f"{name}.csv", ["draw"] + cols,
                               ([d] + flat[d].tolist() for d in range(len(post)))))
    info = {"shapes": {name: list(getattr(post, name).shape[1:]) for name in _BLOCKS},
            "lambda_skips": int(post.lambda_skips), "meta": post.meta}
    out.append(atomic_write_text(directory / "posterior.json", json.dumps(info, indent=2, sort_keys=True) + "\n"))
    return out


def read_posterior(directory) -> PosteriorSamples:
    directory = Path(directory)
    info_path = directory / "posterior.json"
    if not info_path.exists():
        raise DataError(f"{directory}: not a posterior directory (posterior.json missing)")
    info = json.loads(info_path.read_text())
    arrays = {}
    for name in _BLOCKS:
        _, rows, _ = read_table(directory / f"{name}.csv", ["draw"])
        a = _numeric(directory / f"{name}.csv", rows)
        shape = tuple(info["shapes"][name])
        D = len(rows)
        arrays[name] = a[:, 1:].reshape((D,) + shape) if D else np.zeros((0,) + shape)
    lengths = {len(v) for v in arrays.values()}
    if len(lengths) != 1:
        raise DataError(f"{directory}: parameter blocks have different numbers of draws")
    return PosteriorSamples(**arrays, lambda_skips=info.get("lambda_skips", 0), meta=info.get("meta", {}))


def write_trace_summary(path, post: PosteriorSamples) -> Path:
    rows = ((k, m, se) for k, (m, se) in post.summary().items())
    return write_table(path, ["parameter", "mean", "mcse"], rows)


# forecasts ------------------------------------------------------------------

def write_forecast(path, fd: ForecastDistribution) -> Path:
    return write_table(path, ["horizon", "cell", "state", "mean", "hpd_lo", "hpd_hi"], fd.long_rows())


def read_forecast(path) -> ForecastDistribution:
    _, rows, _ = read_table(path, ["horizon", "cell", "state", "mean", "hpd_lo", "hpd_hi"])
    a = _numeric(path, rows)
    if a.size == 0:
        raise DataError(f"{path}: no records")
    tau, n = int(a[:, 0].max()), int(a[:, 1].max()) + 1
    if len(a) != tau * n * N_STATES:
        raise DataError(f"{path}: expected {tau * n * N_STATES} records, found {len(a)}")
    k, i, j = a[:, 0].astype(int) - 1, a[:, 1].astype(int), a[:, 2].astype(int) - 1
    arrs = []
    for col in (3, 4, 5):
        x = np.zeros((tau, n, N_STATES))
        x[k, i, j] = a[:, col]
        arrs.append(x)
    return ForecastDistribution(*arrs, trajectories=None)


def write_probability_rasters(directory, fd: ForecastDistribution, grid: GridSpec) -> list[Path]:
    """``h{k}_state{j}.csv`` grids of mean probability for every horizon and state."""
    out = []
    for k in range(fd.horizon):
        for j in STATES:
            out.append(write_grid_text(Path(directory) / f"h{k + 1}_state{j}.csv",
                                       grid.to_raster(fd.mean[k, :, j - 1])))
    return out


# scores ---------------------------------------------------------------------

def write_score(path, report: ScoreReport) -> Path:
    return write_table(path, ["state", "metric", "value"], report.rows())


def read_score(path) -> ScoreReport:
    _, rows, _ = read_table(path, ["state", "metric", "value"])
    rep = ScoreReport()
    for state, metric, value in rows:
        if state == "all":
            setattr(rep, metric, float(value))
            continue
        j = int(state)
        if metric == "gss":
            rep.gss[j] = float(value)
        elif metric in ("correct", "incorrect"):
            getattr(rep, metric)[j] = int(value)
        else:
            raise DataError(f"{path}: unknown metric {metric!r}")
    return rep
