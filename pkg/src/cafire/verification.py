"""Categorical forecast verification: Gilbert skill score and ranked probability score."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .grid import N_STATES, STATES


@dataclass(frozen=True)
class ContingencyTable:
    a: int  # predicted yes, observed yes
    b: int  # predicted yes, observed no
    c: int  # predicted no, observed yes
    d: int  # predicted no, observed no

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise DataError("contingency counts must be nonnegative")
        if self.n <= 0:
            raise DataError("contingency table is empty")

    @property
    def n(self):
        return self.a + self.b + self.c + self.d

    @classmethod
    def from_binary(cls, pred, truth) -> "ContingencyTable":
        pred = np.asarray(pred, dtype=bool)
        truth = np.asarray(truth, dtype=bool)
        return cls(int((pred & truth).sum()), int((pred & ~truth).sum()),
                   int((~pred & truth).sum()), int((~pred & ~truth).sum()))


def gss(table: ContingencyTable) -> float:
    """Gilbert skill score; ``nan`` marks an undefined score (zero denominator)."""
    a, b, c, n = table.a, table.b, table.c, table.n
    chance = (a + c) * (a + b) / n
    denom = a + b + c - chance
    if denom == 0:
        return math.nan
    return (a - chance) / denom


def _check_shapes(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise DataError(f"prediction shape {pred.shape} differs from truth {truth.shape}")
    return pred, truth


def per_state_gss(pred, truth, state: int) -> float:
    """GSS of the one-vs-rest compression ``state`` against all other states."""
    pred, truth = _check_shapes(pred, truth)
    return gss(ContingencyTable.from_binary(pred == state, truth == state))


def rps(probabilities, truth, atol: float = 1e-8) -> float:
    """Mean ranked probability score over locations.

    ``probabilities`` has a trailing axis of length 3 matching ``truth``'s
    shape otherwise.  Each location scores
    ``sum_j (cumsum(p)_j - cumsum(indicator)_j)^2 / (J - 1)``.
    """
    p = np.asarray(probabilities, dtype=float)
    truth = np.asarray(truth)
    if p.shape != truth.shape + (N_STATES,):
        raise DataError(f"probabilities {p.shape} do not match truth {truth.shape}")
    if np.any(np.abs(p.sum(axis=-1) - 1) > atol):
        raise DataError("probability vectors must sum to 1")
    ind = (truth[..., None] == np.arange(1, N_STATES + 1)).astype(float)
    diff = np.cumsum(p, axis=-1) - np.cumsum(ind, axis=-1)
    return float(((diff ** 2).sum(axis=-1) / (N_STATES - 1)).mean())


def naive_rps(truth) -> float:
    truth = np.asarray(truth)
    if truth.size == 0:
        raise DataError("naive_rps needs at least one location")
    return rps(np.full(truth.shape + (N_STATES,), 1.0 / N_STATES), truth)


@dataclass
class ScoreReport:
    correct: dict = field(default_factory=dict)
    incorrect: dict = field(default_factory=dict)
    gss: dict = field(default_factory=dict)
    rps: float | None = None
    naive_rps: float | None = None

    def rows(self):
        """``(state, metric, value)`` records; state ``all`` for field-wide scores."""
        for j in STATES:
            yield j, "correct", self.correct[j]
            yield j, "incorrect", self.incorrect[j]
            yield j, "gss", self.gss[j]
        if self.rps is not None:
            yield "all", "rps", self.rps
            yield "all", "naive_rps", self.naive_rps

    def table(self) -> str:
        names = {1: "Unburnt", 2: "Burning", 3: "Burnt"}
        lines = [f"{'Metric':<20}" + "".join(f"{names[j]:>16}" for j in STATES)]
        lines.append(f"{'Prediction Correct':<20}" +
                     "".join(f"{f'{self.correct[j]} ({self.incorrect[j]})':>16}" for j in STATES))
        lines.append(f"{'GSS':<20}" + "".join(
            f"{'undefined' if math.isnan(self.gss[j]) else f'{self.gss[j]:.3f}':>16}" for j in STATES))
        if self.rps is not None:
            lines.append(f"RPS {self.rps:.3f} (naive {self.naive_rps:.3f})")
        return "\n".join(lines)


def score(pred_states, truth, probabilities=None) -> ScoreReport:
    """Per-state hit counts and GSS, plus RPS when probabilities are given.

    ``correct[j]`` counts locations predicted ``j`` that were ``j``;
    ``incorrect[j]`` counts those predicted ``j`` that were something else.
    """
    pred, truth = _check_shapes(pred_states, truth)
    rep = ScoreReport()
    for j in STATES:
        hit = pred == j
        rep.correct[j] = int((hit & (truth == j)).sum())
        rep.incorrect[j] = int((hit & (truth != j)).sum())
        rep.gss[j] = per_state_gss(pred, truth, j)
    if probabilities is not None:
        rep.rps = rps(probabilities, truth)
        rep.naive_rps = naive_rps(truth)
    return rep
