"""Gibbs sampler for the ordinal-probit cellular automaton with a low-rank latent VAR.

Model, for modeled frames ``t = 1..T`` and cells ``i``::

    Z_t = X_t beta + H Y_t + eps_t,      eps_t ~ N(0, I)
    Y_t = M Y_{t-1} + eta_t,             eta_t ~ N(0, Q)
    S_t(i) = j  iff  Z_t(i) in (lambda_{j-1}, lambda_j]

with cutpoints ``(-inf, 0, lambda_2, inf)``.  Array conventions: ``X`` is
``(T, n, p)``, states and ``Z`` are ``(T, n)``, ``Y`` is ``(T + 1, r)`` with
row 0 holding the initial state ``Y_0``.  ``r = 0`` drops the latent process
and gives plain ordinal probit regression.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg, optimize
from scipy.special import log_ndtr, ndtri_exp
from scipy.stats import wishart

from .errors import ConfigError, DataError, NumericalError
from .grid import N_STATES
from .summaries import hpd_intervals, log_interval_prob, state_probabilities

log = logging.getLogger(__name__)


def truncated_normal(mean, sd, lower, upper, rng, size=None) -> np.ndarray:
    """Draw from ``N(mean, sd^2)`` restricted to ``(lower, upper]``.

    Inverse-CDF sampling in log space.  Intervals in the right tail are
    reflected to the left tail first, so bounds many standard deviations
    from the mean are handled without rejection loops.
    """
    mean, sd, lower, upper = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mean, sd, lower, upper)))
    if size is not None:
        mean, sd, lower, upper = (np.broadcast_to(v, size) for v in (mean, sd, lower, upper))
    a = (lower - mean) / sd
    b = (upper - mean) / sd
    if np.any(~(a < b)):
        raise DataError("truncation interval is empty (lower >= upper)")
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    log_hi = log_ndtr(hi)
    ratio = np.exp(log_ndtr(lo) - log_hi)
    u = rng.random(lo.shape)
    x = ndtri_exp(log_hi + np.log(ratio + u * (1.0 - ratio)))
    x = np.clip(x, lo, hi)
    x = np.where(flip, -x, x)
    out = mean + sd * x
    return out if out.ndim else float(out)


def _as_cov(value, dim: int) -> np.ndarray:
    value = np.asarray(value, dtype=float)
    if value.ndim == 0:
        return float(value) * np.eye(dim)
    if value.ndim == 1:
        return np.diag(value)
    return value


def _as_vec(value, dim: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=float), (dim,)).copy()


@dataclass
class Priors:
    """Prior hyperparameters; scalars expand to isotropic values.

    ``beta ~ N(beta_mean, beta_cov)``, ``vec(M) ~ N(m_mean, m_cov)``,
    ``Y_0 ~ N(y0_mean, y0_cov)``, ``Q^{-1} ~ Wishart(df=nu_q, scale=(nu_q C_q)^{-1})``.
    The interior cutpoint has a flat prior on ``(0, cutpoint_upper)``;
    the default infinite upper bound makes it improper.
    """

    beta_mean: object = 0.0
    beta_cov: object = 2.0
    m_mean: object = 0.0
    m_cov: object = 2.0
    y0_mean: object = 0.0
    y0_cov: object = 5.0
    nu_q: float = 1.0
    c_q: object = 1.0
    cutpoint_upper: float = np.inf

    def __post_init__(self):
        if self.nu_q <= 0:
            raise ConfigError("nu_q must be positive")
        if not self.cutpoint_upper > 0:
            raise ConfigError("cutpoint_upper must be positive")

    def resolve(self, p: int, r: int) -> dict:
        out = {
            "beta_mean": _as_vec(self.beta_mean, p),
            "beta_prec": _inv_pd(_as_cov(self.beta_cov, p), "beta prior covariance"),
            "m_mean": _as_vec(self.m_mean, r * r),
            "m_prec": _inv_pd(_as_cov(self.m_cov, r * r), "M prior covariance") if r else np.zeros((0, 0)),
            "y0_mean": _as_vec(self.y0_mean, r),
            "y0_prec": _inv_pd(_as_cov(self.y0_cov, r), "Y0 prior covariance") if r else np.zeros((0, 0)),
            "nu_q": float(self.nu_q),
            "c_q": _as_cov(self.c_q, r),
            "cutpoint_upper": float(self.cutpoint_upper),
        }
        out["beta_prec_mean"] = out["beta_prec"] @ out["beta_mean"]
        return out

    def to_dict(self) -> dict:
        return {k: (np.asarray(v).tolist() if not isinstance(v, (int, float)) else v)
                for k, v in asdict(self).items()}


def _cholesky(A: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor of the symmetrized matrix, retrying once with jitter."""
    A = 0.5 * (A + A.T)
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(A + 1e-10 * np.eye(A.shape[0]))
    except np.linalg.LinAlgError:
        raise NumericalError(f"{what} is not positive definite") from None


def _inv_pd(A: np.ndarray, what: str = "matrix") -> np.ndarray:
    L = _cholesky(A, what)
    Linv = linalg.solve_triangular(L, np.eye(A.shape[0]), lower=True)
    return Linv.T @ Linv


def gaussian_from_precision(prec: np.ndarray, a: np.ndarray, rng, what: str = "precision"):
    """Draw from ``N(prec^{-1} a, prec^{-1})``; returns (draw, mean)."""
    L = _cholesky(prec, what)
    mean = linalg.cho_solve((L, True), a)
    z = rng.standard_normal(a.shape[0])
    return mean + linalg.solve_triangular(L.T, z, lower=False), mean


@dataclass
class ModelData:
    """Fixed inputs of a fit: covariates, observed states and basis.

    ``prev_states`` (optional, same shape as ``states``) switches on the
    monotone likelihood: a cell that stays in its previous state ``j`` only
    tells us ``Z <= lambda_j``, mirroring how forecasts fold lower states
    into the current one.  Without it every cell is truncated to the full
    interval of its observed state.
    """

    X: np.ndarray
    states: np.ndarray
    H: np.ndarray | None = None
    prev_states: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.states = np.asarray(self.states, dtype=np.int8)
        if self.X.ndim != 3:
            raise DataError("X must be a (T, n, p) array")
        T, n, _ = self.X.shape
        if self.states.shape != (T, n):
            raise DataError(f"states shape {self.states.shape} does not match X {(T, n)}")
        if not np.isin(self.states, (1, 2, 3)).all():
            raise DataError("states must take values in {1, 2, 3}")
        self.H = np.zeros((n, 0)) if self.H is None else np.asarray(self.H, dtype=float)
        if self.H.ndim != 2 or self.H.shape[0] != n:
            raise DataError(f"basis must have {n} rows, got shape {self.H.shape}")
        # indices into the cutpoint vector (-inf, 0, lambda_2, inf)
        self.upper_idx = self.states.astype(int)
        self.lower_idx = self.upper_idx - 1
        if self.prev_states is not None:
            self.prev_states = np.asarray(self.prev_states, dtype=np.int8)
            if self.prev_states.shape != self.states.shape:
                raise DataError("prev_states must match the shape of states")
            if np.any(self.prev_states > self.states):
                raise DataError("states move backwards relative to prev_states")
            self.lower_idx = np.where(self.prev_states == self.states, 0, self.lower_idx)
        self.XtX = np.einsum("tnp,tnq->pq", self.X, self.X)
        self.HtH = self.H.T @ self.H

    @property
    def T(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def p(self) -> int:
        return self.X.shape[2]

    @property
    def r(self) -> int:
        return self.H.shape[1]

    def xbeta(self, beta) -> np.ndarray:
        return self.X @ beta

    def hy(self, Y) -> np.ndarray:
        if self.r == 0:
            return np.zeros((self.T, self.n))
        return Y[1:] @ self.H.T


@dataclass
class ModelParams:
    beta: np.ndarray
    cutpoint: float
    M: np.ndarray
    Q: np.ndarray
    Y: np.ndarray
    Z: np.ndarray | None = None

    @property
    def cutpoints(self) -> np.ndarray:
        """``(lambda_0, ..., lambda_3) = (-inf, 0, lambda_2, inf)``."""
        return np.array([-np.inf, 0.0, self.cutpoint, np.inf])

    def copy(self) -> "ModelParams":
        return ModelParams(self.beta.copy(), float(self.cutpoint), self.M.copy(), self.Q.copy(),
                           self.Y.copy(), None if self.Z is None else self.Z.copy())


def y_conditional(t: int, params: ModelParams, data: ModelData, prior: dict):
    """Mean and covariance of ``Y_t`` given every other quantity."""
    T = data.T
    Qi = _inv_pd(params.Q, "Q")
    M = params.M
    MtQi = M.T @ Qi
    if t == 0:
        prec = MtQi @ M + prior["y0_prec"]
        a = MtQi @ params.Y[1] + prior["y0_prec"] @ prior["y0_mean"]
    else:
        resid = params.Z[t - 1] - data.X[t - 1] @ params.beta
        prec = data.HtH + Qi
        a = data.H.T @ resid + Qi @ M @ params.Y[t - 1]
        if t < T:
            prec = prec + MtQi @ M
            a = a + MtQi @ params.Y[t + 1]
    cov = _inv_pd(prec, f"Y_{t} conditional precision")
    return cov @ a, cov


def update_Y(params: ModelParams, data: ModelData, prior: dict, rng) -> np.ndarray:
    """Single-site sweep ``Y_0, Y_1, ..., Y_T`` through the full conditionals."""
    T = data.T
    Qi = _inv_pd(params.Q, "Q")
    M = params.M
    MtQi = M.T @ Qi
    MtQiM = MtQi @ M
    QiM = Qi @ M
    resid = params.Z - data.xbeta(params.beta)
    data_a = resid @ data.H  # (T, r)
    Y = params.Y
    for t in range(T + 1):
        if t == 0:
            prec = MtQiM + prior["y0_prec"]
            a = MtQi @ Y[1] + prior["y0_prec"] @ prior["y0_mean"]
        else:
            prec = data.HtH + Qi
            a = data_a[t - 1] + QiM @ Y[t - 1]
            if t < T:
                prec = prec + MtQiM
                a = a + MtQi @ Y[t + 1]
        Y[t], _ = gaussian_from_precision(prec, a, rng, f"Y_{t} conditional precision")
    return Y


def q_conditional(params: ModelParams, prior: dict):
    """Wishart parameters ``(df, scale)`` of the full conditional of ``Q^{-1}``."""
    Y, M = params.Y, params.M
    r = M.shape[0]
    T = Y.shape[0] - 1
    resid = Y[1:] - Y[:-1] @ M.T
    ss = resid.T @ resid + prior["nu_q"] * prior["c_q"]
    df = prior["nu_q"] + T
    if df <= r - 1:
        raise ConfigError(f"Wishart degrees of freedom {df} must exceed r - 1 = {r - 1}")
    return df, _inv_pd(ss, "Q scale")


def update_Q(params: ModelParams, prior: dict, rng) -> np.ndarray:
    df, scale = q_conditional(params, prior)
    r = scale.shape[0]
    precision = np.atleast_2d(wishart.rvs(df=df, scale=scale, random_state=rng)).reshape(r, r)
    Q = _inv_pd(precision, "Q precision draw")
    return 0.5 * (Q + Q.T)


def m_conditional(params: ModelParams, prior: dict):
    """Precision and linear term of the Gaussian conditional of ``vec(M)`` (column-major)."""
    Y = params.Y
    Qi = _inv_pd(params.Q, "Q")
    prev, cur = Y[:-1], Y[1:]
    prec = np.kron(prev.T @ prev, Qi) + prior["m_prec"]
    a = (Qi @ cur.T @ prev).reshape(-1, order="F") + prior["m_prec"] @ prior["m_mean"]
    return prec, a


def update_M(params: ModelParams, prior: dict, rng) -> np.ndarray:
    r = params.M.shape[0]
    prec, a = m_conditional(params, prior)
    m, _ = gaussian_from_precision(prec, a, rng, "vec(M) conditional precision")
    return m.reshape(r, r, order="F")


def beta_conditional(params: ModelParams, data: ModelData, prior: dict):
    resid = params.Z - data.hy(params.Y)
    prec = data.XtX + prior["beta_prec"]
    a = np.einsum("tnp,tn->p", data.X, resid) + prior["beta_prec_mean"]
    return prec, a


def update_beta(params: ModelParams, data: ModelData, prior: dict, rng) -> np.ndarray:
    prec, a = beta_conditional(params, data, prior)
    beta, _ = gaussian_from_precision(prec, a, rng, "beta conditional precision")
    return beta


def update_Z(params: ModelParams, data: ModelData, rng) -> np.ndarray:
    """Latent draws truncated to each cell's state interval."""
    mean = data.xbeta(params.beta) + data.hy(params.Y)
    cuts = params.cutpoints
    return truncated_normal(mean, 1.0, cuts[data.lower_idx], cuts[data.upper_idx], rng)


def cutpoint_bounds(params: ModelParams, data: ModelData, prior: dict) -> tuple[float, float]:
    """Support of the uniform full conditional of ``lambda_2``."""
    Z = params.Z
    z2 = Z[data.upper_idx == 2]
    z3 = Z[data.lower_idx == 2]
    lower = max(float(z2.max()) if z2.size else -np.inf, 0.0)
    upper = min(float(z3.min()) if z3.size else np.inf, prior["cutpoint_upper"])
    return lower, upper


def update_lambda(params: ModelParams, data: ModelData, prior: dict, rng) -> tuple[float, bool]:
    """Returns the new cutpoint and whether the move was skipped.

    When no burnt cells bound the interval from above (and the prior is
    flat on the half line) the conditional is improper; the current value is
    kept for that sweep.
    """
    lower, upper = cutpoint_bounds(params, data, prior)
    if not np.isfinite(upper):
        return params.cutpoint, True
    if not lower < upper:
        raise NumericalError(f"empty cutpoint interval ({lower}, {upper})")
    return float(rng.uniform(lower, upper)), False


def update_lambda_collapsed(params: ModelParams, data: ModelData, prior: dict, rng, step: float):
    """Random-walk Metropolis move on ``lambda_2`` with ``Z`` integrated out.

    On acceptance ``Z`` is redrawn given the new cutpoint, so the pair moves
    jointly.  Returns ``(cutpoint, Z, accepted)``.
    """
    proposal = params.cutpoint + step * rng.standard_normal()
    log_u = np.log(rng.random())
    if not 0.0 < proposal < prior["cutpoint_upper"]:
        return params.cutpoint, params.Z, False
    involved = (data.upper_idx == 2) | (data.lower_idx == 2)
    if not involved.any():
        return params.cutpoint, params.Z, False
    mu = (data.xbeta(params.beta) + data.hy(params.Y))[involved]
    lo, hi = data.lower_idx[involved], data.upper_idx[involved]

    def loglik(lam):
        cuts = np.array([-np.inf, 0.0, lam, np.inf])
        return log_interval_prob(cuts[lo] - mu, cuts[hi] - mu).sum()

    if log_u >= loglik(proposal) - loglik(params.cutpoint):
        return params.cutpoint, params.Z, False
    moved = params.copy()
    moved.cutpoint = float(proposal)
    return moved.cutpoint, update_Z(moved, data, rng), True


def ordinal_probit_map(X, lower_idx, upper_idx, beta_prec=None, beta_prec_mean=None):
    """Posterior mode of ``(beta, lambda_2)`` for the covariate-only model.

    ``lower_idx``/``upper_idx`` index the cutpoint vector
    ``(-inf, 0, lambda_2, inf)`` per observation.  Used to start chains.
    """
    X = np.asarray(X, dtype=float).reshape(-1, np.shape(X)[-1])
    lo_i = np.asarray(lower_idx).reshape(-1).astype(int)
    hi_i = np.asarray(upper_idx).reshape(-1).astype(int)
    p = X.shape[1]
    beta_prec = np.zeros((p, p)) if beta_prec is None else beta_prec
    beta_prec_mean = np.zeros(p) if beta_prec_mean is None else beta_prec_mean
    keys, w = np.unique(np.column_stack([X, lo_i, hi_i]), axis=0, return_counts=True)
    X, lo_i, hi_i = keys[:, :p], keys[:, p].astype(int), keys[:, p + 1].astype(int)
    w = w.astype(float)
    has3 = np.any((lo_i == 2) | (hi_i == 2))

    def unpack(theta):
        lam2 = np.exp(theta[p]) if has3 else np.inf
        return theta[:p], np.array([-np.inf, 0.0, lam2, np.inf])

    def nll(theta):
        beta, cuts = unpack(theta)
        mu = X @ beta
        ll = log_interval_prob(cuts[lo_i] - mu, cuts[hi_i] - mu)
        return -(w * ll).sum() + 0.5 * beta @ beta_prec @ beta - beta_prec_mean @ beta

    theta0 = np.zeros(p + 1)
    theta0[p] = np.log(2.0)
    res = optimize.minimize(nll, theta0, method="BFGS", options={"gtol": 1e-6, "maxiter": 2000})
    if not np.all(np.isfinite(res.x)):
        raise NumericalError("ordinal probit mode search diverged")
    beta, cuts = unpack(res.x)
    return beta, float(cuts[2]) if has3 else 1.0


@dataclass
class ChainConfig:
    iterations: int = 10000
    burn_in: int | None = None
    thin: int = 1
    seed: int = 0
    z_every: int = 0
    init: str = "map"
    cutpoint_step: float = 0.1

    def __post_init__(self):
        if self.burn_in is None:
            self.burn_in = self.iterations // 2
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.init not in ("map", "prior_mean"):
            raise ConfigError(f"unknown init {self.init!r}")

    @property
    def n_draws(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


@dataclass
class PosteriorSamples:
    """Retained draws.  Leading axis indexes draws."""

    beta: np.ndarray
    cutpoint: np.ndarray
    M: np.ndarray
    Q: np.ndarray
    Y: np.ndarray
    Z: np.ndarray | None = None
    z_draws: np.ndarray | None = None
    lambda_skips: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.beta.shape[0]

    @property
    def r(self) -> int:
        return self.M.shape[1]

    def draw(self, d: int) -> ModelParams:
        return ModelParams(self.beta[d], float(self.cutpoint[d]), self.M[d], self.Q[d], self.Y[d])

    @classmethod
    def concatenate(cls, chains: list["PosteriorSamples"]) -> "PosteriorSamples":
        first = chains[0]
        z = None
        if all(c.Z is not None for c in chains):
            z = np.concatenate([c.Z for c in chains])
        meta = dict(first.meta, chains=len(chains))
        return cls(*(np.concatenate([getattr(c, k) for c in chains]) for k in ("beta", "cutpoint", "M", "Q", "Y")),
                   Z=z, lambda_skips=sum(c.lambda_skips for c in chains), meta=meta)

    def summary(self) -> dict:
        """Posterior mean and batch-means Monte Carlo standard error per scalar."""
        out = {}
        blocks = {"beta": self.beta, "cutpoint": self.cutpoint[:, None], "M": self.M.reshape(len(self), -1),
                  "Q": self.Q.reshape(len(self), -1)}
        for name, arr in blocks.items():
            for k in range(arr.shape[1]):
                key = name if arr.shape[1] == 1 else f"{name}[{k}]"
                out[key] = (float(arr[:, k].mean()), batch_means_se(arr[:, k]))
        return out


def batch_means_se(x, n_batches: int = 20) -> float:
    x = np.asarray(x, dtype=float)
    if x.size < 2 * n_batches:
        return float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else float("nan")
    size = x.size // n_batches
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


class GibbsSampler:
    """One Markov chain over ``(Y, Q, M, beta, Z, lambda_2)``.

    A sweep updates, in order, the latent coefficients, ``Q``, ``M``,
    ``beta``, ``Z`` and the interior cutpoint.  A positive
    ``cutpoint_step`` appends a collapsed Metropolis move on the cutpoint,
    which mixes far better than the uniform update when there are many
    cells per state.
    """

    def __init__(self, data: ModelData, priors: Priors | None = None, seed=None,
                 init: str = "map", params: ModelParams | None = None, cutpoint_step: float = 0.0):
        self.data = data
        self.cutpoint_step = cutpoint_step
        self.cutpoint_accepts = 0
        self.priors = priors or Priors()
        self.prior = self.priors.resolve(data.p, data.r)
        self.rng = np.random.default_rng(seed)
        self.lambda_skips = 0
        self.sweeps = 0
        self.params = params.copy() if params is not None else self._initial(init)
        if self.params.Z is None:
            self.params.Z = update_Z(self.params, data, self.rng)

    def _initial(self, init: str) -> ModelParams:
        d, r = self.data, self.data.r
        if init == "map":
            beta, cut = ordinal_probit_map(d.X, d.lower_idx, d.upper_idx,
                                           self.prior["beta_prec"], self.prior["beta_prec_mean"])
            if cut >= self.prior["cutpoint_upper"]:
                cut = 0.5 * self.prior["cutpoint_upper"]
        else:
            beta = self.prior["beta_mean"].copy()
            cut = 1.0 if np.isinf(self.prior["cutpoint_upper"]) else 0.5 * self.prior["cutpoint_upper"]
        return ModelParams(beta=beta, cutpoint=cut, M=np.zeros((r, r)), Q=np.eye(r),
                           Y=np.zeros((d.T + 1, r)))

    def sweep(self) -> ModelParams:
        p, d, prior, rng = self.params, self.data, self.prior, self.rng
        try:
            if d.r:
                p.Y = update_Y(p, d, prior, rng)
                p.Q = update_Q(p, prior, rng)
                p.M = update_M(p, prior, rng)
            p.beta = update_beta(p, d, prior, rng)
            p.Z = update_Z(p, d, rng)
            p.cutpoint, skipped = update_lambda(p, d, prior, rng)
            if self.cutpoint_step > 0:
                p.cutpoint, p.Z, accepted = update_lambda_collapsed(p, d, prior, rng, self.cutpoint_step)
                self.cutpoint_accepts += int(accepted)
        except (NumericalError, ConfigError) as exc:
            raise type(exc)(f"sweep {self.sweeps}: {exc}") from exc
        self.lambda_skips += int(skipped)
        self.sweeps += 1
        return p

    def run(self, cfg: ChainConfig, progress: bool = False) -> PosteriorSamples:
        d = self.data
        D = cfg.n_draws
        beta = np.empty((D, d.p))
        cut = np.empty(D)
        M = np.empty((D, d.r, d.r))
        Q = np.empty((D, d.r, d.r))
        Y = np.empty((D, d.T + 1, d.r))
        zs, z_idx = [], []
        k = 0
        for it in range(cfg.iterations):
            p = self.sweep()
            if progress and (it + 1) % max(1, cfg.iterations // 10) == 0:
                log.info("sweep %d/%d cutpoint=%.4f", it + 1, cfg.iterations, p.cutpoint)
            if it < cfg.burn_in or (it - cfg.burn_in) % cfg.thin:
                continue
            if k >= D:
                continue
            beta[k], cut[k], M[k], Q[k], Y[k] = p.beta, p.cutpoint, p.M, p.Q, p.Y
            if cfg.z_every and k % cfg.z_every == 0:
                zs.append(p.Z.astype(np.float32))
                z_idx.append(k)
            k += 1
        return PosteriorSamples(beta, cut, M, Q, Y,
                                Z=np.stack(zs) if zs else None,
                                z_draws=np.array(z_idx, dtype=int) if zs else None,
                                lambda_skips=self.lambda_skips,
                                meta={"cutpoint_accept_rate": self.cutpoint_accepts / max(self.sweeps, 1),
                                      "seed": cfg.seed, "iterations": cfg.iterations, "burn_in": cfg.burn_in,
                                      "thin": cfg.thin, "T": d.T, "n": d.n, "p": d.p, "r": d.r,
                                      "priors": self.priors.to_dict()})


def run_gibbs(X, states, H=None, priors: Priors | None = None, cfg: ChainConfig | None = None,
              chains: int = 1, progress: bool = False, prev_states=None) -> PosteriorSamples:
    """Fit the model; independent chains draw seeds from one ``SeedSequence``."""
    cfg = cfg or ChainConfig()
    data = X if isinstance(X, ModelData) else ModelData(X, states, H, prev_states)
    if chains == 1:
        seeds = [cfg.seed]
    else:
        seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(cfg.seed).spawn(chains)]
    runs = []
    for s in seeds:
        sampler = GibbsSampler(data, priors, seed=s, init=cfg.init, cutpoint_step=cfg.cutpoint_step)
        runs.append(sampler.run(cfg, progress=progress))
    post = runs[0] if chains == 1 else PosteriorSamples.concatenate(runs)
    post.meta["seed"] = cfg.seed
    return post


def fit_states(states, winds, spec, grid, H=None, priors=None, cfg=None, chains=1, progress=False,
               monotone: bool = True):
    """Build neighbor covariates from an observed field and run the sampler.

    The first frame only conditions the covariates; frames ``1..T-1`` are
    modeled.  ``monotone`` selects the state-aware likelihood described in
    :class:`ModelData`.
    """
    from .neighborhood import covariate_stack

    states = np.asarray(states)
    X = covariate_stack(states, winds, spec, grid)
    prev = states[:-1] if monotone else None
    post = run_gibbs(X, states[1:], H, priors, cfg, chains=chains, progress=progress, prev_states=prev)
    post.meta["monotone"] = monotone
    return post


@dataclass
class TransitionSummary:
    mean: np.ndarray          # (3,) posterior mean of P(S = j)
    hpd: np.ndarray           # (3, 2)
    advance_mean: np.ndarray  # (3,) posterior mean of P(S >= j)
    advance_hpd: np.ndarray   # (3, 2)

    @property
    def ignition(self) -> tuple[float, tuple[float, float]]:
        """Mean and HPD of leaving the unburnt state, ``P(S >= 2)``."""
        return float(self.advance_mean[1]), tuple(self.advance_hpd[1])


def transition_probability(posterior: PosteriorSamples, covariate_row, latent: float = 0.0,
                           mass: float = 0.95) -> TransitionSummary:
    """Posterior summary of the state probabilities for one covariate row."""
    if len(posterior) == 0:
        raise DataError("posterior has no draws")
    x = np.asarray(covariate_row, dtype=float)
    mu = posterior.beta @ x + latent if x.size else np.full(len(posterior), float(latent))
    probs = state_probabilities(mu, posterior.cutpoint)
    adv = np.flip(np.cumsum(np.flip(probs, axis=1), axis=1), axis=1)
    return TransitionSummary(probs.mean(axis=0), hpd_intervals(probs, mass),
                             adv.mean(axis=0), hpd_intervals(adv, mass))


def in_sample_probabilities(posterior: PosteriorSamples, X, H=None, prev_states=None,
                            max_draws: int | None = 500) -> np.ndarray:
    """Posterior mean one-step state probabilities for every modeled cell and frame.

    With ``prev_states`` given, probability of moving to a lower state is
    folded into the previous state.
    """
    from .grid import monotone_collapse

    X = np.asarray(X, dtype=float)
    idx = np.arange(len(posterior))
    if max_draws and idx.size > max_draws:
        idx = idx[np.linspace(0, idx.size - 1, max_draws).round().astype(int)]
    acc = np.zeros(X.shape[:2] + (N_STATES,))
    for d in idx:
        mu = X @ posterior.beta[d]
        if H is not None and posterior.r:
            mu = mu + posterior.Y[d, 1:] @ np.asarray(H).T
        p = state_probabilities(mu, posterior.cutpoint[d])
        if prev_states is not None:
            p = monotone_collapse(p, prev_states)
        acc += p
    return acc / idx.size


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]
