"""Run configuration (JSON) with full defaulting, and the run manifest."""
from __future__ import annotations

import copy
import hashlib
import json
import platform
import zlib
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .io import atomic_write_text

DEFAULTS = {
    "seed": None,
    "grid": {"nx": None, "ny": None},
    "classifier": {"background_temp": 300.0, "ignition_threshold": 100.0, "extinction_temp": 300.0},
    "neighborhood": {"wind_threshold": 2.0, "side": "upwind"},
    "rules": {"kind": "ordinal_probit", "beta": [-0.5, 0.95, 1.5], "cutpoint": 10.5},
    "simulate": {
        "kind": "rules",
        "T": 45,
        "initial": {"kind": "corner", "size": 2},
        "winds": {"kind": "intermittent", "speed": 3.0, "period": 8, "on": 4},
        "temperatures": False,
        "ridge_burn": {},
    },
    "data": {"states": None, "winds": None, "temperatures": None, "frames": None},
    "basis": {"kind": "none", "r": 5, "tau": 5, "knots": None, "knot_grid": [3, 2], "bandwidth": None,
              "file": None},
    "prior": {"beta_mean": 0.0, "beta_cov": 2.0, "m_mean": 0.0, "m_cov": 2.0, "y0_mean": 0.0,
              "y0_cov": 5.0, "nu_q": 1.0, "c_q": 1.0, "cutpoint_upper": None},
    "chain": {"iterations": 10000, "burn_in": None, "thin": 1, "chains": 1, "init": "map",
              "cutpoint_step": 0.1, "monotone": True},
    "forecast": {"horizon": 5, "draws": 1000, "mass": 0.95, "winds": "persistence", "posterior": None,
                 "include_obs_noise": True, "include_state_noise": True},
    "score": {"forecast": None, "truth": None, "frames": None},
}

# keys whose value is a file path, resolved against the config file's directory
PATH_KEYS = {("data", "states"), ("data", "winds"), ("data", "temperatures"), ("basis", "file"),
             ("forecast", "posterior"), ("score", "forecast"), ("score", "truth"),
             ("simulate", "initial", "file"), ("simulate", "winds", "file")}

OPEN_SECTIONS = {("simulate", "initial"), ("simulate", "winds"), ("simulate", "ridge_burn"), ("rules",)}


def _merge(default: dict, given: dict, path: tuple) -> dict:
    out = copy.deepcopy(default)
    for key, value in given.items():
        where = path + (key,)
        if key not in default and path not in OPEN_SECTIONS:
            raise ConfigError(f"{'.'.join(where)}: unknown setting")
        if isinstance(default.get(key), dict) and where not in OPEN_SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{'.'.join(where)}: expected an object")
            out[key] = _merge(default[key], value, where)
        elif where in OPEN_SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{'.'.join(where)}: expected an object")
            out[key] = copy.deepcopy(value)
        else:
            out[key] = value
    return out


def _resolve_paths(cfg: dict, base: Path) -> None:
    for keys in PATH_KEYS:
        node = cfg
        for k in keys[:-1]:
            node = node.get(k) if isinstance(node, dict) else None
        if isinstance(node, dict) and isinstance(node.get(keys[-1]), str):
            p = Path(node[keys[-1]])
            node[keys[-1]] = str(p if p.is_absolute() else (base / p).resolve())


def _require(cond: bool, where: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{where}: {msg}")


def _validate(cfg: dict) -> None:
    seed = cfg["seed"]
    _require(isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0, "seed",
             "a nonnegative integer seed is required")
    ch = cfg["chain"]
    _require(isinstance(ch["iterations"], int) and ch["iterations"] >= 1, "chain.iterations", "must be >= 1")
    if ch["burn_in"] is not None:
        _require(isinstance(ch["burn_in"], int) and 0 <= ch["burn_in"] < ch["iterations"], "chain.burn_in",
                 "must satisfy 0 <= burn_in < iterations")
    _require(isinstance(ch["chains"], int) and ch["chains"] >= 1, "chain.chains", "must be >= 1")
    _require(isinstance(ch["thin"], int) and ch["thin"] >= 1, "chain.thin", "must be >= 1")
    fc = cfg["forecast"]
    _require(isinstance(fc["horizon"], int) and fc["horizon"] >= 1, "forecast.horizon", "must be >= 1")
    _require(0 < fc["mass"] < 1, "forecast.mass", "must lie in (0, 1)")
    b = cfg["basis"]
    _require(b["kind"] in ("none", "eof", "bisquare", "file"), "basis.kind",
             "must be one of none, eof, bisquare, file")
    if b["kind"] != "none":
        _require(isinstance(b["r"], int) and b["r"] >= 1, "basis.r", "must be >= 1")
    _require(cfg["neighborhood"]["side"] in ("upwind", "downwind"), "neighborhood.side",
             "must be 'upwind' or 'downwind'")
    for key in ("nx", "ny"):
        v = cfg["grid"][key]
        _require(v is None or (isinstance(v, int) and v >= 1), f"grid.{key}", "must be a positive integer")


def load_config(source=None, seed: int | None = None, overrides: dict | None = None) -> dict:
    """Merge a JSON config (path, dict or run manifest) over the defaults and validate it.

    A run manifest carries its effective config under ``"config"`` and is
    accepted directly, which is how a run is repeated.
    """
    base = Path.cwd()
    given: dict = {}
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        try:
            given = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        base = path.parent
    elif isinstance(source, dict):
        given = copy.deepcopy(source)
    if not isinstance(given, dict):
        raise ConfigError("config must be a JSON object")
    if "manifest_version" in given:
        given = given["config"]
    cfg = _merge(DEFAULTS, given, ())
    for k, v in (overrides or {}).items():
        cfg = _merge(cfg, {k: v}, ())
    if seed is not None:
        cfg["seed"] = seed
    _resolve_paths(cfg, base)
    _validate(cfg)
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def substream(seed: int, name: str) -> int:
    """Deterministic child seed for a named stage such as ``"fit"`` or ``"forecast"``."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(name.encode())])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def versions() -> dict:
    import scipy

    from . import __version__
    return {"cafire": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, command: str, cfg: dict, outputs, notes: dict | None = None) -> Path:
    """Write ``manifest.json`` last, listing each output with its SHA-256."""
    out_dir = Path(out_dir)
    inventory = {str(Path(p).relative_to(out_dir)): file_digest(p) for p in sorted(map(str, outputs))}
    manifest = {
        "manifest_version": 1,
        "command": command,
        "seed": cfg["seed"],
        "config_hash": config_hash(cfg),
        "versions": versions(),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "outputs": inventory,
        "notes": notes or {},
        "config": cfg,
    }
    return atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
