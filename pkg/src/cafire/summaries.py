"""Ordinal-probit link probabilities and highest-posterior-density intervals."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import log_ndtr, ndtr

from .errors import DataError


def state_probabilities(mean, cutpoint) -> np.ndarray:
    """Category probabilities ``P(S = j)`` for a latent mean and interior cutpoint.

    With cutpoints ``(-inf, 0, cutpoint, inf)`` the result has a trailing
    axis of length 3.  Broadcasts over ``mean`` and ``cutpoint``.
    """
    mean, cutpoint = np.broadcast_arrays(np.asarray(mean, dtype=float), np.asarray(cutpoint, dtype=float))
    p1 = ndtr(-mean)
    p3 = ndtr(mean - cutpoint)
    # choose the difference whose arguments sit in the accurate (left) tail
    left = mean < 0.5 * cutpoint
    p2 = np.where(left, ndtr(cutpoint - mean) - p1, ndtr(mean) - p3)
    return np.stack([p1, np.clip(p2, 0.0, 1.0), p3], axis=-1)


def log_interval_prob(lo, hi) -> np.ndarray:
    """``log(Phi(hi) - Phi(lo))`` evaluated without cancellation."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    flip = lo > 0
    a = np.where(flip, -hi, lo)
    b = np.where(flip, -lo, hi)
    log_b = log_ndtr(b)
    with np.errstate(divide="ignore"):
        return log_b + np.log1p(-np.exp(log_ndtr(a) - log_b))


def hpd_interval(samples, mass: float = 0.95) -> tuple[float, float]:
    """Shortest window of sorted samples holding ``ceil(mass * count)`` of them.

    Ties between equally short windows go to the leftmost one.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise DataError("hpd_interval needs at least one sample")
    if not 0 < mass < 1:
        raise DataError("mass must lie in (0, 1)")
    k = min(x.size, math.ceil(mass * x.size - 1e-12))
    widths = x[k - 1:] - x[: x.size - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


def hpd_intervals(samples, mass: float = 0.95, axis: int = 0) -> np.ndarray:
    """Vectorized :func:`hpd_interval` along ``axis``; bounds on a new last axis."""
    x = np.sort(np.moveaxis(np.asarray(samples, dtype=float), axis, 0), axis=0)
    count = x.shape[0]
    if count == 0:
        raise DataError("hpd_intervals needs at least one sample")
    k = min(count, math.ceil(mass * count - 1e-12))
    widths = x[k - 1:] - x[: count - k + 1]
    i = np.argmin(widths, axis=0)[None]
    lo = np.take_along_axis(x, i, axis=0)[0]
    hi = np.take_along_axis(x, i + k - 1, axis=0)[0]
    return np.stack([lo, hi], axis=-1)
