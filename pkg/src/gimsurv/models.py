"""Parametric lifetime families, censored-data likelihoods and maximum likelihood.

Three families are supported:

* exponential, ``theta = (rate,)`` with ``S(t) = exp(-rate * t)``
* Weibull, ``theta = (shape, rate)`` with ``S(t) = exp(-rate * t**shape)``
* log-normal, ``theta = (meanlog, sdlog)``

Note that the Weibull ``rate`` multiplies ``t**shape``; it is not a scale in
time units. With ``shape == 1`` the Weibull reduces to the exponential.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
from scipy import special

from .exceptions import DataFormatError, DegenerateDataError, DomainError
from .optimize import INITIAL_STEP, nelder_mead

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


class Family(str, enum.Enum):
    EXPONENTIAL = "exponential"
    WEIBULL = "weibull"
    LOGNORMAL = "lognormal"

    @property
    def dim(self) -> int:
        return 1 if self is Family.EXPONENTIAL else 2

    @property
    def param_names(self) -> tuple[str, ...]:
        return _PARAM_NAMES[self]

    @property
    def positive(self) -> tuple[bool, ...]:
        """Which parameters are constrained to be positive."""
        return _POSITIVE[self]

    @property
    def code(self) -> int:
        return _CODES[self]


_PARAM_NAMES = {
    Family.EXPONENTIAL: ("rate",),
    Family.WEIBULL: ("shape", "rate"),
    Family.LOGNORMAL: ("meanlog", "sdlog"),
}
_POSITIVE = {
    Family.EXPONENTIAL: (True,),
    Family.WEIBULL: (True, True),
    Family.LOGNORMAL: (False, True),
}
_CODES = {Family.EXPONENTIAL: 0, Family.WEIBULL: 1, Family.LOGNORMAL: 2}


class Side(str, enum.Enum):
    RIGHT = "right"
    LEFT = "left"


def as_family(model) -> Family:
    try:
        return Family(model)
    except ValueError:
        raise DomainError(f"unknown model family {model!r}") from None


def as_side(side) -> Side:
    try:
        return Side(side)
    except ValueError:
        raise DomainError(f"unknown censoring side {side!r}") from None


class CensoredObservation(NamedTuple):
    time: float
    status: int


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Observed pairs ``(time, status)`` sharing one censoring side.

    ``status`` is 1 for an exactly observed value and 0 for a censored one.
    Under right censoring a censored time is a lower bound on the event
    time; under left censoring it is an upper bound (e.g. a detection limit).
    """

    time: np.ndarray
    status: np.ndarray
    side: Side = Side.RIGHT

    def __post_init__(self):
        time = np.array(self.time, dtype=float).ravel()
        raw_status = np.asarray(self.status).ravel()
        if time.size == 0:
            raise DataFormatError("dataset is empty")
        if raw_status.shape != time.shape:
            raise DataFormatError("time and status must have the same length")
        if not np.all(np.isfinite(time)) or np.any(time <= 0):
            raise DataFormatError("times must be finite and strictly positive")
        if not np.all((raw_status == 0) | (raw_status == 1)):
            raise DataFormatError("status values must be 0 or 1")
        status = raw_status.astype(np.int8)
        time.flags.writeable = False
        status.flags.writeable = False
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "status", status)
        object.__setattr__(self, "side", as_side(self.side))

    @classmethod
    def from_observations(
        cls, observations: Iterable[tuple[float, int]], side=Side.RIGHT
    ) -> "SurvivalDataset":
        pairs = list(observations)
        if not pairs:
            raise DataFormatError("dataset is empty")
        time, status = zip(*pairs)
        return cls(np.array(time, dtype=float), np.array(status), side)

    @property
    def n(self) -> int:
        return self.time.size

    @property
    def n_events(self) -> int:
        return int(self.status.sum())

    @property
    def censored_fraction(self) -> float:
        return 1.0 - self.n_events / self.n

    @property
    def observations(self) -> list[CensoredObservation]:
        return [CensoredObservation(float(t), int(d)) for t, d in zip(self.time, self.status)]

    def flipped(self) -> "SurvivalDataset":
        """The same times with every status label reversed."""
        return SurvivalDataset(self.time, 1 - self.status, self.side)

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return (
            f"SurvivalDataset(n={self.n}, events={self.n_events}, side={self.side.value!r})"
        )


@dataclass(frozen=True)
class MleResult:
    estimate: np.ndarray
    loglik: float
    converged: bool
    iterations: int

    def to_dict(self, model=None) -> dict:
        out = {
            "estimate": [float(v) for v in self.estimate],
            "loglik": float(self.loglik),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
        }
        if model is not None:
            out["parameters"] = dict(zip(as_family(model).param_names, out["estimate"]))
        return out


def check_theta(model, theta) -> np.ndarray:
    """Validate ``theta`` for ``model`` and return it as a float array."""
    family = as_family(model)
    arr = np.asarray(theta, dtype=float).ravel()
    if arr.size != family.dim:
        raise DomainError(f"{family.value} expects {family.dim} parameter(s), got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("parameters must be finite")
    for value, name, pos in zip(arr, family.param_names, family.positive):
        if pos and value <= 0:
            raise DomainError(f"{name} must be positive, got {value}")
    return arr


def _check_times(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("times must be strictly positive")
    return t


def _cumhaz_weibull(shape, rate, t):
    return rate * np.power(t, shape)


def log_density(model, theta, t):
    """Log density of ``model`` at ``theta``, evaluated at times ``t``."""
    family = as_family(model)
    p = check_theta(family, theta)
    t = _check_times(t)
    if family is Family.EXPONENTIAL:
        return np.log(p[0]) - p[0] * t
    if family is Family.WEIBULL:
        beta, lam = p
        return np.log(lam) + np.log(beta) + (beta - 1.0) * np.log(t) - _cumhaz_weibull(beta, lam, t)
    mu, sigma = p
    logt = np.log(t)
    z = (logt - mu) / sigma
    return -_HALF_LOG_2PI - np.log(sigma) - logt - 0.5 * z * z


def log_survival(model, theta, t):
    """``log(1 - F(t))``, accurate in both tails."""
    family = as_family(model)
    p = check_theta(family, theta)
    t = _check_times(t)
    if family is Family.EXPONENTIAL:
        return -p[0] * t
    if family is Family.WEIBULL:
        return -_cumhaz_weibull(p[0], p[1], t)
    return special.log_ndtr(-(np.log(t) - p[0]) / p[1])


def log_cdf(model, theta, t):
    """``log F(t)``, accurate in both tails."""
    family = as_family(model)
    p = check_theta(family, theta)
    t = _check_times(t)
    if family is Family.EXPONENTIAL:
        return np.log(-np.expm1(-p[0] * t))
    if family is Family.WEIBULL:
        return np.log(-np.expm1(-_cumhaz_weibull(p[0], p[1], t)))
    return special.log_ndtr((np.log(t) - p[0]) / p[1])


def _loglik_arrays(family: Family, side: Side, p: np.ndarray, t: np.ndarray, d: np.ndarray) -> float:
    exact = d.astype(bool)
    total = float(np.sum(log_density(family, p, t[exact])))
    cens = t[~exact]
    if cens.size:
        tail = log_survival if side is Side.RIGHT else log_cdf
        total += float(np.sum(tail(family, p, cens)))
    return total


def log_likelihood(model, theta, data: SurvivalDataset) -> float:
    """Censored-data log-likelihood with censoring-distribution terms dropped.

    Right censoring contributes ``log S(t)`` per censored observation, left
    censoring contributes ``log F(t)``.
    """
    family = as_family(model)
    p = check_theta(family, theta)
    return _loglik_arrays(family, data.side, p, data.time, data.status)


def score(model, theta, data: SurvivalDataset) -> np.ndarray:
    """Analytic gradient of :func:`log_likelihood` in the natural parameters."""
    family = as_family(model)
    p = check_theta(family, theta)
    t = data.time
    exact = data.status.astype(bool)
    te, tc = t[exact], t[~exact]
    right = data.side is Side.RIGHT

    if family is Family.EXPONENTIAL:
        (rate,) = p
        g = np.sum(1.0 / rate - te)
        if right:
            g -= np.sum(tc)
        else:
            g += np.sum(tc / np.expm1(rate * tc))
        return np.array([g])

    if family is Family.WEIBULL:
        beta, lam = p
        le, lc = np.log(te), np.log(tc)
        se, sc = _cumhaz_weibull(beta, lam, te), _cumhaz_weibull(beta, lam, tc)
        g_beta = np.sum(1.0 / beta + le - se * le)
        g_lam = np.sum(1.0 / lam - se / lam)
        # d(cumhaz)/d(shape) = cumhaz * log t, d(cumhaz)/d(rate) = cumhaz / rate
        if right:
            g_beta -= np.sum(sc * lc)
            g_lam -= np.sum(sc / lam)
        else:
            w = 1.0 / np.expm1(sc)
            g_beta += np.sum(w * sc * lc)
            g_lam += np.sum(w * sc / lam)
        return np.array([g_beta, g_lam])

    mu, sigma = p
    ze = (np.log(te) - mu) / sigma
    zc = (np.log(tc) - mu) / sigma
    g_mu = np.sum(ze / sigma)
    g_sigma = np.sum((ze * ze - 1.0) / sigma)
    log_phi = -_HALF_LOG_2PI - 0.5 * zc * zc
    if right:
        mills = np.exp(log_phi - special.log_ndtr(-zc))
        g_mu += np.sum(mills / sigma)
        g_sigma += np.sum(mills * zc / sigma)
    else:
        mills = np.exp(log_phi - special.log_ndtr(zc))
        g_mu -= np.sum(mills / sigma)
        g_sigma -= np.sum(mills * zc / sigma)
    return np.array([g_mu, g_sigma])


def to_unconstrained(model, theta) -> np.ndarray:
    """Map ``theta`` to the optimizer's scale (log for positive parameters)."""
    family = as_family(model)
    p = check_theta(family, theta)
    return np.where(family.positive, np.log(np.where(family.positive, p, 1.0)), p)


def from_unconstrained(model, u) -> np.ndarray:
    family = as_family(model)
    u = np.asarray(u, dtype=float)
    return np.where(family.positive, np.exp(u), u)


def initial_estimate(family: Family, side: Side, t: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Cheap in-domain starting point for the simplex search.

    Assumes the caller has already screened degenerate data.
    """
    exact = d.astype(bool)
    k = int(exact.sum())
    rate = k / float(t.sum())
    if family is Family.EXPONENTIAL:
        return np.array([rate])
    if family is Family.WEIBULL:
        return np.array([1.0, rate])
    logs = np.log(t[exact])
    sd = float(np.std(logs, ddof=1))
    return np.array([float(logs.mean()), sd if sd > 0 else 1.0])


def screen_degenerate(family: Family, t: np.ndarray, d: np.ndarray) -> str | None:
    """Reason the MLE is undefined for these data, or ``None``."""
    exact = d.astype(bool)
    k = int(exact.sum())
    if k == 0:
        return "no exact observations; the MLE lies on the parameter boundary"
    if family.dim == 2:
        if k < 2:
            return "fewer exact observations than parameters"
        te = t[exact]
        if te.max() == te.min():
            return "all exact observations coincide"
    return None


def _fit_arrays(family: Family, side: Side, t: np.ndarray, d: np.ndarray) -> MleResult:
    reason = screen_degenerate(family, t, d)
    if reason is not None:
        raise DegenerateDataError(reason)

    k = int(d.sum())
    if family is Family.EXPONENTIAL and (side is Side.RIGHT or k == t.size):
        rate = k / float(t.sum())
        p = np.array([rate])
        return MleResult(p, _loglik_arrays(family, side, p, t, d), True, 0)

    start = to_unconstrained(family, initial_estimate(family, side, t, d))

    def objective(u):
        return -_loglik_arrays(family, side, from_unconstrained(family, u), t, d)

    with np.errstate(all="ignore"):
        res = nelder_mead(objective, start, step=INITIAL_STEP)
    return MleResult(from_unconstrained(family, res.x), -res.fun, res.converged, res.iterations)


def fit_mle(model, data: SurvivalDataset) -> MleResult:
    """Maximum likelihood estimate for ``model`` on ``data``.

    The exponential model under right censoring uses the closed form
    ``sum(status) / sum(time)``. Everything else runs a simplex search on the
    log-transformed positive parameters.

    Raises
    ------
    DegenerateDataError
        If there are no exact observations, or fewer distinct exact
        observations than parameters in a two-parameter family.
    """
    family = as_family(model)
    return _fit_arrays(family, data.side, data.time, data.status)


def quantile(model, theta, u):
    """Inverse CDF of ``model`` at probabilities ``u``."""
    family = as_family(model)
    p = check_theta(family, theta)
    u = np.asarray(u, dtype=float)
    if family is Family.EXPONENTIAL:
        return -np.log1p(-u) / p[0]
    if family is Family.WEIBULL:
        return np.power(-np.log1p(-u) / p[1], 1.0 / p[0])
    return np.exp(p[0] + p[1] * special.ndtri(u))


def sample_event_times(model, theta, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` iid event times drawn by inverse-CDF from ``rng`` uniforms."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return quantile(model, theta, _uniforms(rng, n))


def _uniforms(rng: np.random.Generator, size) -> np.ndarray:
    # rng.random() can return exactly 0, which maps to t = 0 outside the support
    u = rng.random(size)
    return np.maximum(u, np.finfo(float).tiny)
