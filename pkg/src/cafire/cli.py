"""Command-line pipeline: simulate, build-basis, fit, forecast, score.

Every command reads one JSON config, writes its outputs under ``--out`` and
finishes with ``manifest.json``.  Passing that manifest back as ``--config``
repeats the run.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .basis import bisquare_basis, construct_eofs, regular_knots
from .config import load_config, substream, write_manifest
from .errors import ConfigError, DataError, NumericalError
from .forecast import ForecastConfig, forecast, most_probable_states
from .grid import GridSpec, TemperatureRaster
from .inference import ChainConfig, Priors, fit_states
from .neighborhood import NeighborhoodSpec, as_winds
from .simulator import RuleTable, SimConfig, simulate_fire
from .synthetic import burn_temperatures, corner_ignition, intermittent_wind, ridge_burn
from .verification import score

log = logging.getLogger("cafire")

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4


def _grid(cfg) -> GridSpec:
    g = cfg["grid"]
    if g["nx"] is None or g["ny"] is None:
        raise ConfigError("grid.nx, grid.ny: grid dimensions are required")
    return GridSpec(g["nx"], g["ny"])


def _spec(cfg) -> NeighborhoodSpec:
    nb = cfg["neighborhood"]
    return NeighborhoodSpec(wind_threshold=float(nb["wind_threshold"]), side=nb["side"])


def _need(cfg, section: str, key: str):
    value = cfg[section][key]
    if value is None:
        raise ConfigError(f"{section}.{key}: required for this command")
    return value


def _frames(cfg, T: int) -> tuple[int, int]:
    fr = cfg["data"]["frames"]
    if fr is None:
        return 0, T
    if not (isinstance(fr, list) and len(fr) == 2 and 0 <= fr[0] < fr[1] <= T):
        raise ConfigError(f"data.frames: expected [start, stop] within [0, {T}], got {fr}")
    return int(fr[0]), int(fr[1])


class Data:
    """States, winds and (optionally) temperatures restricted to the training frames."""

    def __init__(self, cfg, need_temps: bool = False):
        grid = _grid(cfg)
        self.grid = grid
        self.all_states = io.read_statefield(_need(cfg, "data", "states"), n=grid.n)
        T = self.all_states.shape[0]
        wpath = cfg["data"]["winds"]
        self.all_winds = io.read_winds(wpath) if wpath else np.zeros((T, 2))
        if len(self.all_winds) < T:
            raise DataError(f"{wpath}: {len(self.all_winds)} wind records for {T} frames")
        self.start, self.stop = _frames(cfg, T)
        self.states = self.all_states[self.start:self.stop]
        self.winds = self.all_winds[self.start:self.stop]
        self.temps = None
        if need_temps:
            tpath = cfg["data"]["temperatures"]
            if tpath is None:
                raise ConfigError("data.temperatures: required for constructed EOFs")
            raster = io.read_temperatures(tpath, grid)
            temps = raster.cells()
            if temps.shape[0] < self.stop:
                raise DataError(f"{tpath}: {temps.shape[0]} frames, need {self.stop}")
            self.temps = temps[self.start:self.stop]

    def future_winds(self, cfg, steps: int):
        """Winds for ``steps`` frames after the training window, or ``None`` for persistence."""
        mode = cfg["forecast"]["winds"]
        if mode == "persistence":
            return None
        if mode == "observed":
            w = self.all_winds[self.stop:self.stop + steps]
            if len(w) != steps:
                raise ConfigError(f"forecast.winds: only {len(w)} observed records after frame "
                                  f"{self.stop} for horizon {steps}")
            return w
        w = io.read_winds(mode)
        if len(w) != steps:
            raise ConfigError(f"forecast.winds: {len(w)} records for horizon {steps}")
        return w


# commands ---------------------------------------------------------------------

def cmd_simulate(cfg, out: Path, quiet: bool = False):
    grid = _grid(cfg)
    sim = cfg["simulate"]
    T = int(sim["T"])
    if T < 1:
        raise ConfigError("simulate.T: must be >= 1")
    if sim["kind"] not in ("rules", "ridge_burn"):
        raise ConfigError(f"simulate.kind: expected 'rules' or 'ridge_burn', got {sim['kind']!r}")
    seed = substream(cfg["seed"], "simulate")
    outputs = []
    if sim["kind"] == "ridge_burn":
        try:
            scn = ridge_burn(seed, T=T, nx=grid.nx, ny=grid.ny, **sim["ridge_burn"])
        except TypeError as exc:
            raise ConfigError(f"simulate.ridge_burn: {exc}") from None
        states, winds, temps = scn.states, scn.winds, scn.temps
    else:
        init = sim["initial"]
        if init.get("kind") == "corner":
            state0 = corner_ignition(grid, int(init.get("size", 2)))
        elif init.get("kind") == "file":
            state0 = io.read_statefield(init["file"], n=grid.n)[0]
        else:
            raise ConfigError(f"simulate.initial.kind: unknown kind {init.get('kind')!r}")
        w = sim["winds"]
        kind = w.get("kind")
        if kind == "intermittent":
            winds = intermittent_wind(T, float(w.get("speed", 3.0)), int(w.get("period", 8)), int(w.get("on", 4)))
        elif kind == "calm":
            winds = np.zeros((T, 2))
        elif kind == "constant":
            winds = np.tile([float(w.get("u", 0.0)), float(w.get("v", 0.0))], (T, 1))
        elif kind == "file":
            winds = io.read_winds(w["file"])[:T]
            if len(winds) != T:
                raise DataError(f"{w['file']}: fewer than {T} wind records")
        else:
            raise ConfigError(f"simulate.winds.kind: unknown kind {kind!r}")
        try:
            rules = RuleTable.from_dict(cfg["rules"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"rules: {exc}") from None
        states = simulate_fire(rules, SimConfig(grid, T, state0, winds, seed, _spec(cfg)))
        temps = None
        if sim["temperatures"]:
            temps = burn_temperatures(states, np.random.default_rng(substream(cfg["seed"], "temperatures")))
    outputs.append(io.write_statefield(out / "states.csv", states))
    outputs.append(io.write_winds(out / "winds.csv", winds))
    if temps is not None:
        outputs.append(io.write_raster_long(out / "temperatures.csv",
                                            TemperatureRaster(grid.to_raster(temps), np.arange(T))))
    log.info("simulated %d frames on a %dx%d grid", T, grid.ny, grid.nx)
    return outputs, {}


def cmd_build_basis(cfg, out: Path, quiet: bool = False):
    b = cfg["basis"]
    kind = b["kind"]
    if kind == "eof":
        data = Data(cfg, need_temps=True)
        fw = data.future_winds(cfg, b["tau"]) if b["tau"] > 0 else None
        basis = construct_eofs(data.states, data.temps, int(b["tau"]), int(b["r"]), data.winds, _spec(cfg),
                               data.grid, seed=substream(cfg["seed"], "basis"), forecast_winds=fw)
    elif kind == "bisquare":
        grid = _grid(cfg)
        knots = b["knots"] if b["knots"] is not None else regular_knots(grid, *b["knot_grid"])
        basis = bisquare_basis(grid, knots, b["bandwidth"])
        basis.meta["seed"] = None
    else:
        raise ConfigError(f"basis.kind: build-basis needs 'eof' or 'bisquare', got {kind!r}")
    path = io.write_basis(out / "basis.csv", basis)
    log.info("wrote %s basis with r=%d", basis.kind, basis.r)
    return [path], {}


def _load_basis(cfg, grid: GridSpec):
    b = cfg["basis"]
    if b["kind"] == "none":
        return None
    if b["file"] is None:
        raise ConfigError(f"basis.file: a basis file is required when basis.kind={b['kind']!r} (r={b['r']})")
    if not Path(b["file"]).exists():
        raise ConfigError(f"basis.file: {b['file']} not found")
    basis = io.read_basis(b["file"])
    if basis.n != grid.n:
        raise DataError(f"{b['file']}: basis has {basis.n} rows, grid has {grid.n} cells")
    return basis.H


def _priors(cfg) -> Priors:
    p = dict(cfg["prior"])
    if p["cutpoint_upper"] is None:
        p["cutpoint_upper"] = np.inf
    return Priors(**p)


def cmd_fit(cfg, out: Path, quiet: bool = False):
    data = Data(cfg)
    H = _load_basis(cfg, data.grid)
    ch = cfg["chain"]
    chain = ChainConfig(iterations=ch["iterations"], burn_in=ch["burn_in"], thin=ch["thin"],
                        seed=substream(cfg["seed"], "fit"), init=ch["init"], cutpoint_step=ch["cutpoint_step"])
    post = fit_states(data.states, data.winds, _spec(cfg), data.grid, H=H, priors=_priors(cfg), cfg=chain,
                      chains=ch["chains"], progress=not quiet, monotone=ch["monotone"])
    outputs = io.write_posterior(out / "posterior", post)
    outputs.append(io.write_trace_summary(out / "summary.csv", post))
    log.info("kept %d draws; cutpoint mean %.4f", len(post), float(post.cutpoint.mean()))
    return outputs, {"draws": len(post), "r": post.r}


def cmd_forecast(cfg, out: Path, quiet: bool = False):
    data = Data(cfg)
    post = io.read_posterior(_need(cfg, "forecast", "posterior"))
    H = _load_basis(cfg, data.grid) if post.r else None
    if post.r and H is None:
        raise ConfigError(f"basis.file: posterior has r={post.r} but no basis is configured")
    fc = cfg["forecast"]
    winds = data.future_winds(cfg, fc["horizon"])
    fcfg = ForecastConfig(fc["horizon"], winds=winds, draws=fc["draws"], seed=substream(cfg["seed"], "forecast"),
                          mass=fc["mass"], include_obs_noise=fc["include_obs_noise"],
                          include_state_noise=fc["include_state_noise"])
    fd = forecast(post, data.states[-1], H, fcfg, data.grid, _spec(cfg), last_wind=as_winds(data.winds)[-1])
    outputs = [io.write_forecast(out / "forecast.csv", fd),
               io.write_statefield(out / "most_probable.csv", most_probable_states(fd))]
    outputs += io.write_probability_rasters(out / "rasters", fd, data.grid)
    notes = {"persistence_wind": bool(fd.persistence_wind), "origin_frame": data.stop - 1}
    if fd.persistence_wind:
        log.info("no wind forecast given; persisting the last observed record")
    return outputs, notes


def cmd_score(cfg, out: Path, quiet: bool = False):
    fd = io.read_forecast(_need(cfg, "score", "forecast"))
    truth = io.read_statefield(_need(cfg, "score", "truth"))
    frames = cfg["score"]["frames"]
    if frames is None:
        frames = [truth.shape[0] - fd.horizon, truth.shape[0]]
    a, b = frames
    if not 0 <= a < b <= truth.shape[0]:
        raise ConfigError(f"score.frames: [{a}, {b}] outside the {truth.shape[0]} truth frames")
    truth = truth[a:b]
    if truth.shape != fd.mean.shape[:2]:
        raise DataError(f"truth frames {truth.shape} do not match forecast {fd.mean.shape[:2]}")
    report = score(most_probable_states(fd), truth, fd.mean)
    if not quiet:
        print(report.table())
    return [io.write_score(out / "score.csv", report)], {"frames": [a, b]}


COMMANDS = {"simulate": cmd_simulate, "build-basis": cmd_build_basis, "fit": cmd_fit,
            "forecast": cmd_forecast, "score": cmd_score}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cafire", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON config or a previous run's manifest.json")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--out", default="cafire-out", help="output directory (default: %(default)s)")
    ap.add_argument("--chains", type=int, help="override chain.chains")
    ap.add_argument("--quiet", action="store_true", help="only report errors")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    overrides = {"chain": {"chains": args.chains}} if args.chains is not None else None
    try:
        cfg = load_config(args.config, seed=args.seed, overrides=overrides)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        outputs, notes = COMMANDS[args.command](cfg, out, quiet=args.quiet)
        write_manifest(out, args.command, cfg, outputs, notes)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except NumericalError as exc:
        log.error("numerical error: %s", exc)
        return EXIT_NUMERICAL
    return 0


def main(argv=None):
    sys.exit(run(argv))
