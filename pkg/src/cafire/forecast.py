"""Posterior predictive forecasts of the fire state field."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .grid import N_STATES, GridSpec, monotone_collapse
from .inference import PosteriorSamples, _cholesky
from .neighborhood import NeighborhoodSpec, as_winds, neighbor_counts
from .summaries import hpd_interval, hpd_intervals, state_probabilities

__all__ = ["ForecastConfig", "ForecastDistribution", "forecast", "hpd_interval", "most_probable_states"]


@dataclass
class ForecastConfig:
    """Forecast settings.

    ``winds`` holds one record per forecast step; when omitted the last
    observed record persists.  ``include_obs_noise`` and
    ``include_state_noise`` switch the latent-field noise and the VAR
    innovations on or off.
    """

    horizon: int
    winds: np.ndarray | None = None
    draws: int | None = 1000
    seed: int = 0
    mass: float = 0.95
    include_obs_noise: bool = True
    include_state_noise: bool = True

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("forecast horizon must be >= 1")
        if self.winds is not None:
            self.winds = as_winds(self.winds)
            if len(self.winds) != self.horizon:
                raise ConfigError(f"wind forecast has {len(self.winds)} records for horizon {self.horizon}")


@dataclass
class ForecastDistribution:
    """Per horizon, cell and state: mean probability and HPD band.

    ``mean``, ``lower`` and ``upper`` are ``(horizon, n, 3)``;
    ``trajectories`` is ``(draws, horizon, n)`` of sampled states.
    """

    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    trajectories: np.ndarray
    mass: float = 0.95
    persistence_wind: bool = False

    @property
    def horizon(self) -> int:
        return self.mean.shape[0]

    def long_rows(self):
        """Yield ``(horizon, cell, state, mean, hpd_lo, hpd_hi)`` with 1-based horizon."""
        tau, n, J = self.mean.shape
        for k in range(tau):
            for i in range(n):
                for j in range(J):
                    yield k + 1, i, j + 1, self.mean[k, i, j], self.lower[k, i, j], self.upper[k, i, j]


def _draw_indices(total: int, wanted: int | None) -> np.ndarray:
    if wanted is None or wanted >= total:
        return np.arange(total)
    return np.unique(np.linspace(0, total - 1, wanted).round().astype(int))


def _sample_states(probs: np.ndarray, rng) -> np.ndarray:
    cum = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[0])[:, None]
    return (1 + (u >= cum[:, :-1]).sum(axis=1)).astype(np.int8)


def forecast(posterior: PosteriorSamples, last_state, H, cfg: ForecastConfig, grid: GridSpec,
             spec: NeighborhoodSpec | None = None, last_wind=None) -> ForecastDistribution:
    """Propagate each posterior draw ``cfg.horizon`` steps past the last frame.

    Per draw and step the latent coefficients advance through the VAR, the
    covariates are rebuilt from that draw's sampled states, state
    probabilities follow from the cutpoint link (states below a cell's
    current state fold into it) and a state is sampled per cell.
    """
    if len(posterior) == 0:
        raise DataError("posterior has no draws")
    last_state = np.asarray(last_state, dtype=np.int8)
    if last_state.shape != (grid.n,):
        raise DataError(f"last state must have {grid.n} cells")
    r = posterior.r
    H = np.zeros((grid.n, 0)) if H is None else np.asarray(H, dtype=float)
    if H.shape != (grid.n, r):
        raise ConfigError(f"basis shape {H.shape} does not match posterior (n={grid.n}, r={r})")
    persistence = cfg.winds is None
    if persistence:
        if last_wind is None:
            last_wind = (0.0, 0.0)
        winds = np.repeat(as_winds([tuple(last_wind)]), cfg.horizon, axis=0)
    else:
        winds = cfg.winds

    idx = _draw_indices(len(posterior), cfg.draws)
    streams = np.random.SeedSequence(cfg.seed).spawn(len(idx))
    tau = cfg.horizon
    probs = np.empty((len(idx), tau, grid.n, N_STATES))
    traj = np.empty((len(idx), tau, grid.n), dtype=np.int8)
    for m, (d, ss) in enumerate(zip(idx, streams)):
        rng = np.random.default_rng(ss)
        beta, cut = posterior.beta[d], posterior.cutpoint[d]
        if r:
            M = posterior.M[d]
            L = _cholesky(posterior.Q[d], "Q") if cfg.include_state_noise else None
            y = posterior.Y[d, -1].copy()
        prev = last_state
        for k in range(tau):
            mu = neighbor_counts(prev, winds[k], spec, grid) @ beta
            if r:
                y = M @ y
                if L is not None:
                    y = y + L @ rng.standard_normal(r)
                mu = mu + H @ y
            if cfg.include_obs_noise:
                p = monotone_collapse(state_probabilities(mu, cut), prev)
                new = _sample_states(p, rng)
            else:
                level = 1 + (mu > 0).astype(np.int8) + (mu > cut).astype(np.int8)
                new = np.maximum(prev, level).astype(np.int8)
                p = np.eye(N_STATES)[new - 1]
            probs[m, k] = p
            traj[m, k] = new
            prev = new
    mean = probs.mean(axis=0)
    band = hpd_intervals(probs, cfg.mass, axis=0)
    # keep the mean inside its band when the posterior is very skewed
    lower = np.minimum(band[..., 0], mean)
    upper = np.maximum(band[..., 1], mean)
    return ForecastDistribution(mean, lower, upper, traj, cfg.mass, persistence)


def most_probable_states(fd: ForecastDistribution) -> np.ndarray:
    """``(horizon, n)`` argmax of the mean probabilities; ties go to the lower state."""
    return (np.argmax(fd.mean, axis=-1) + 1).astype(np.int8)
