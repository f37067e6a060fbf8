"""Stochastic fire generator and the simple forward model used for basis construction."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, DataError
from .grid import BURNING, BURNT, N_STATES, UNBURNT, GridSpec, monotone_collapse, validate_statefield
from .neighborhood import NeighborhoodSpec, as_winds, neighbor_counts

# Ordinal-probit coefficients reproducing both published transition tables:
# P(ignite | counts) = Phi(counts @ beta), P(burn out | counts) = Phi(counts @ beta - cutpoint).
REFERENCE_BETA = (-0.5, 0.95, 1.5)
REFERENCE_CUTPOINT = 10.5


def _key(row) -> tuple[int, ...]:
    return tuple(int(round(x)) for x in row)


class RuleTable:
    """Transition probabilities as functions of neighbor-state counts.

    Each rule is either a mapping from ``(n_unburnt, n_burning, n_burnt)``
    tuples to a probability or a callable taking a ``(k, 3)`` count array and
    returning ``k`` probabilities.
    """

    def __init__(self, ignite, extinguish, description: str = ""):
        self.ignite = ignite
        self.extinguish = extinguish
        self.description = description
        for name, rule in (("ignite", ignite), ("extinguish", extinguish)):
            if isinstance(rule, Mapping):
                vals = np.array(list(rule.values()), dtype=float)
                if vals.size and (np.any(vals < 0) or np.any(vals > 1)):
                    raise ConfigError(f"{name} probabilities must lie in [0, 1]")

    @classmethod
    def ordinal_probit(cls, beta=REFERENCE_BETA, cutpoint=REFERENCE_CUTPOINT) -> "RuleTable":
        beta = np.asarray(beta, dtype=float)

        def ignite(counts):
            return ndtr(counts @ beta)

        def extinguish(counts):
            return ndtr(counts @ beta - cutpoint)

        rules = cls(ignite, extinguish, description="ordinal_probit")
        rules.params = {"beta": beta.tolist(), "cutpoint": float(cutpoint)}
        return rules

    @classmethod
    def constant(cls, ignite: float, extinguish: float) -> "RuleTable":
        rules = cls(lambda c: np.full(len(c), float(ignite)),
                    lambda c: np.full(len(c), float(extinguish)), description="constant")
        rules.params = {"ignite": float(ignite), "extinguish": float(extinguish)}
        return rules

    def _lookup(self, rule, counts: np.ndarray, name: str) -> np.ndarray:
        if callable(rule):
            p = np.asarray(rule(counts), dtype=float)
        else:
            p = np.empty(len(counts))
            for k, row in enumerate(counts):
                key = _key(row)
                if key not in rule:
                    raise ConfigError(f"{name} rule has no entry for neighbor counts {key}")
                p[k] = rule[key]
        if np.any((p < 0) | (p > 1)):
            raise ConfigError(f"{name} rule produced probabilities outside [0, 1]")
        return p

    def ignite_prob(self, counts) -> np.ndarray:
        return self._lookup(self.ignite, np.atleast_2d(counts), "ignite")

    def extinguish_prob(self, counts) -> np.ndarray:
        return self._lookup(self.extinguish, np.atleast_2d(counts), "extinguish")

    def to_dict(self) -> dict:
        if hasattr(self, "params"):
            return {"kind": self.description, **self.params}
        if isinstance(self.ignite, Mapping) and isinstance(self.extinguish, Mapping):
            return {"kind": "table",
                    "ignite": {",".join(map(str, k)): v for k, v in self.ignite.items()},
                    "extinguish": {",".join(map(str, k)): v for k, v in self.extinguish.items()}}
        raise ConfigError("callable rules cannot be serialized")

    @classmethod
    def from_dict(cls, d: Mapping) -> "RuleTable":
        kind = d.get("kind")
        if kind == "ordinal_probit":
            return cls.ordinal_probit(d.get("beta", REFERENCE_BETA), d.get("cutpoint", REFERENCE_CUTPOINT))
        if kind == "constant":
            return cls.constant(d["ignite"], d["extinguish"])
        if kind == "table":
            def parse(tab):
                return {tuple(int(x) for x in k.split(",")): float(v) for k, v in tab.items()}
            return cls(parse(d["ignite"]), parse(d["extinguish"]), description="table")
        raise ConfigError(f"unknown rule kind {kind!r}")


@dataclass
class SimConfig:
    grid: GridSpec
    T: int
    initial_state: np.ndarray
    winds: np.ndarray | None = None
    seed: int = 0
    neighborhood: NeighborhoodSpec = field(default_factory=NeighborhoodSpec)

    def __post_init__(self):
        if self.T < 1:
            raise ConfigError("T must be >= 1")
        self.initial_state = np.asarray(self.initial_state, dtype=np.int8).reshape(-1)
        if self.initial_state.shape != (self.grid.n,):
            raise ConfigError(f"initial state needs {self.grid.n} cells")
        if validate_statefield(self.initial_state):
            raise ConfigError("initial state contains invalid entries")
        self.winds = as_winds(self.winds, self.T)


def simulate_fire(rules: RuleTable, cfg: SimConfig) -> np.ndarray:
    """Run the stochastic automaton; returns a ``(T, n)`` state field.

    One uniform draw per cell and step decides that cell's transition, so a
    given seed reproduces the field exactly.
    """
    rng = np.random.default_rng(cfg.seed)
    states = np.empty((cfg.T, cfg.grid.n), dtype=np.int8)
    states[0] = cfg.initial_state
    for t in range(1, cfg.T):
        prev = states[t - 1]
        u = rng.random(cfg.grid.n)
        nxt = prev.copy()
        counts = neighbor_counts(prev, cfg.winds[t], cfg.neighborhood, cfg.grid)
        unburnt = prev == UNBURNT
        burning = prev == BURNING
        if unburnt.any():
            p = rules.ignite_prob(counts[unburnt])
            nxt[np.flatnonzero(unburnt)[u[unburnt] < p]] = BURNING
        if burning.any():
            p = rules.extinguish_prob(counts[burning])
            nxt[np.flatnonzero(burning)[u[burning] < p]] = BURNT
        states[t] = nxt
    return states


def empirical_transitions(states, winds, spec, grid, from_state=UNBURNT) -> dict:
    """Count ``{counts: [n_observed, n_advanced]}`` for cells leaving ``from_state``."""
    states = np.asarray(states)
    winds = as_winds(winds, states.shape[0])
    table: dict = {}
    for t in range(1, states.shape[0]):
        counts = neighbor_counts(states[t - 1], winds[t], spec, grid)
        mask = states[t - 1] == from_state
        adv = states[t][mask] > from_state
        for row, a in zip(counts[mask], adv):
            entry = table.setdefault(_key(row), [0, 0])
            entry[0] += 1
            entry[1] += int(a)
    return table


@dataclass
class SimpleMultinomialModel:
    """Baseline-category logit model for the next state given neighbor counts.

    ``coef`` has shape ``(2, 4)``: intercept and three count slopes for the
    burning and burnt categories relative to unburnt.
    """

    coef: np.ndarray
    ridge: float = 1e-2

    def predict_proba(self, counts) -> np.ndarray:
        counts = np.atleast_2d(np.asarray(counts, dtype=float))
        design = np.column_stack([np.ones(len(counts)), counts])
        eta = np.column_stack([np.zeros(len(counts)), design @ self.coef.T])
        eta -= eta.max(axis=1, keepdims=True)
        p = np.exp(eta)
        return p / p.sum(axis=1, keepdims=True)


def _fit_multinomial(design: np.ndarray, y: np.ndarray, weights: np.ndarray, ridge: float,
                     max_iter: int = 100, tol: float = 1e-10) -> np.ndarray:
    k, d = design.shape
    n_cat = N_STATES - 1
    theta = np.zeros(n_cat * d)
    onehot = np.eye(N_STATES)[y - 1][:, 1:]
    penalty = np.full(d, ridge)
    penalty[0] = 0.0
    penalty = np.tile(penalty, n_cat)
    for _ in range(max_iter):
        coef = theta.reshape(n_cat, d)
        eta = np.column_stack([np.zeros(k), design @ coef.T])
        eta -= eta.max(axis=1, keepdims=True)
        p = np.exp(eta)
        p /= p.sum(axis=1, keepdims=True)
        p = p[:, 1:]
        grad = ((onehot - p) * weights[:, None]).T @ design
        grad = grad.reshape(-1) - penalty * theta
        hess = np.zeros((n_cat * d, n_cat * d))
        for a in range(n_cat):
            for b in range(n_cat):
                w = weights * p[:, a] * ((a == b) - p[:, b])
                hess[a * d:(a + 1) * d, b * d:(b + 1) * d] = (design * w[:, None]).T @ design
        hess += np.diag(penalty) + 1e-10 * np.eye(n_cat * d)
        step = np.linalg.solve(hess, grad)
        # halve the step until the penalized log likelihood does not decrease
        def objective(th):
            c = th.reshape(n_cat, d)
            e = np.column_stack([np.zeros(k), design @ c.T])
            m = e.max(axis=1, keepdims=True)
            logp = e - m - np.log(np.exp(e - m).sum(axis=1, keepdims=True))
            return (weights * logp[np.arange(k), y - 1]).sum() - 0.5 * (penalty * th ** 2).sum()
        current = objective(theta)
        scale = 1.0
        while scale > 1e-6 and objective(theta + scale * step) < current - 1e-12:
            scale /= 2
        theta = theta + scale * step
        if np.max(np.abs(scale * step)) < tol:
            break
    return theta.reshape(n_cat, d)


def fit_fsim(states, winds, spec: NeighborhoodSpec | None, grid: GridSpec,
             ridge: float = 1e-2) -> SimpleMultinomialModel:
    """Fit the neighbor-count multinomial model to an observed state field.

    Identical (counts, next state) pairs are aggregated, which makes the
    Newton iterations cheap and the result deterministic.
    """
    states = np.asarray(states)
    if states.shape[0] < 2:
        raise DataError("fitting needs at least two time steps")
    winds = as_winds(winds, states.shape[0])
    rows, ys = [], []
    for t in range(1, states.shape[0]):
        rows.append(neighbor_counts(states[t - 1], winds[t], spec, grid))
        ys.append(states[t])
    X = np.concatenate(rows)
    y = np.concatenate(ys).astype(int)
    if np.unique(y).size < 2:
        raise DataError("degenerate training data: a single state everywhere")
    keys, inverse, weights = np.unique(np.column_stack([X, y]), axis=0, return_inverse=True, return_counts=True)
    design = np.column_stack([np.ones(len(keys)), keys[:, :3]])
    coef = _fit_multinomial(design, keys[:, 3].astype(int), weights.astype(float), ridge)
    return SimpleMultinomialModel(coef=coef, ridge=ridge)


def forward_most_probable(model: SimpleMultinomialModel, last, steps: int, winds,
                          spec: NeighborhoodSpec | None, grid: GridSpec) -> np.ndarray:
    """Evolve the field ``steps`` frames by taking each cell's most probable state.

    ``winds`` holds one record per forecast step.  States never move
    backwards; ties go to the lower state.
    """
    if steps < 1:
        raise ConfigError("steps must be >= 1")
    winds = as_winds(winds, steps)
    out = np.empty((steps, grid.n), dtype=np.int8)
    prev = np.asarray(last, dtype=np.int8)
    for k in range(steps):
        counts = neighbor_counts(prev, winds[k], spec, grid)
        p = monotone_collapse(model.predict_proba(counts), prev)
        prev = (np.argmax(p, axis=1) + 1).astype(np.int8)
        out[k] = prev
    return out


def temperature_pools(states, temps) -> dict[int, np.ndarray]:
    """Group observed temperatures by the state of their cell and frame."""
    states = np.asarray(states)
    temps = np.asarray(temps, dtype=float)
    if states.shape != temps.shape:
        raise DataError(f"states {states.shape} and temperatures {temps.shape} differ in shape")
    return {j: temps[states == j] for j in (UNBURNT, BURNING, BURNT)}


def gsim_impute(states, pools: Mapping[int, np.ndarray], seed=None) -> np.ndarray:
    """Draw a temperature for every cell from the pool of its state."""
    states = np.asarray(states)
    rng = np.random.default_rng(seed)
    out = np.empty(states.shape, dtype=float)
    for j in np.unique(states):
        pool = np.asarray(pools.get(int(j), ()), dtype=float)
        if pool.size == 0:
            raise DataError(f"no training temperatures for state {j}")
        mask = states == j
        out[mask] = rng.choice(pool, size=int(mask.sum()))
    return out
