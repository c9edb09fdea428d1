"""Monte Carlo plausibility contours built on the relative likelihood.

For a candidate ``theta`` the contour value is the probability, under data
simulated from ``theta`` and a censoring law, that the relative likelihood
``L(theta) / L(theta_hat)`` falls at or below its observed value. The
censoring law is unknown in practice and is replaced by the product-limit
estimate of the censoring distribution (:func:`gimsurv.km.reversed_kaplan_meier`).

Random streams are derived from ``(seed, *key)`` with
:class:`numpy.random.SeedSequence`, where the key identifies the grid point.
Replicate ``m`` always consumes row ``m`` of that stream's draws, so results do
not depend on how grid points are spread over worker processes.
"""

from __future__ import annotations

import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .exceptions import DegenerateConfigurationError
from .km import reversed_kaplan_meier
from .models import (
    Family,
    MleResult,
    Side,
    SurvivalDataset,
    _uniforms,
    as_family,
    as_side,
    check_theta,
    fit_mle,
    log_likelihood,
    quantile,
)

log = logging.getLogger(__name__)

DEFAULT_M = 500
DEFAULT_1D_SIZE = 201
DEFAULT_1D_RANGE = (0.2, 3.0)
DEFAULT_2D_SIZE = 61
DEFAULT_2D_RANGE = (0.3, 3.0)
LOCATION_HALF_WIDTH_SE = 4.0


def fresh_seed() -> int:
    """A new 63-bit seed from OS entropy."""
    return int(np.random.SeedSequence().generate_state(2, np.uint64)[0] >> np.uint64(1))


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class MonteCarloConfig:
    """Monte Carlo settings; ``seed=None`` draws a fresh seed at construction."""

    M: int = DEFAULT_M
    seed: int | None = None
    parallel_workers: int = 1

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be at least 1")
        if self.parallel_workers < 1:
            raise ValueError("parallel_workers must be at least 1")
        if self.seed is None:
            object.__setattr__(self, "seed", fresh_seed())
        object.__setattr__(self, "seed", int(self.seed))

    def to_dict(self) -> dict:
        return {"M": self.M, "seed": self.seed, "parallel_workers": self.parallel_workers}


@dataclass(frozen=True)
class EmpiricalRLDistribution:
    """Sorted Monte Carlo draws of the relative likelihood at ``theta``."""

    theta: np.ndarray
    draws: np.ndarray
    seed: int
    stream_key: tuple[int, ...]
    rejections: int = 0
    not_converged: int = 0
    censored_fraction: float = float("nan")

    @property
    def M(self) -> int:
        return self.draws.size


def evaluate_cdf(dist: EmpiricalRLDistribution, r: float) -> float:
    """Fraction of draws ``<= r``."""
    return np.searchsorted(dist.draws, r, side="right") / dist.M


def relative_likelihood(model, data: SurvivalDataset, theta, mle: MleResult) -> float:
    """``L(theta) / L(theta_hat)``, clamped into ``[0, 1]``."""
    excess = log_likelihood(model, theta, data) - mle.loglik
    if excess > 1e-9:
        log.warning("relative likelihood exceeds 1 by %.3g; mle may not be the maximizer", excess)
    return float(min(1.0, math.exp(min(excess, 0.0))))


def combine(x: np.ndarray, c: np.ndarray, side=Side.RIGHT) -> tuple[np.ndarray, np.ndarray]:
    """Observed times and status flags from event times ``x`` and censoring times ``c``."""
    if as_side(side) is Side.RIGHT:
        return np.minimum(x, c), (x <= c).astype(np.int8)
    return np.maximum(x, c), (x >= c).astype(np.int8)


def simulate_rl_distribution(
    model,
    theta,
    ghat,
    n: int,
    config: MonteCarloConfig,
    side=Side.RIGHT,
    stream_key: Sequence[int] = (0,),
    backend: str | None = None,
) -> EmpiricalRLDistribution:
    """Monte Carlo estimate of the distribution of the relative likelihood.

    Each replicate draws ``n`` event times from ``model`` at ``theta`` and ``n``
    censoring times from ``ghat`` (anything with ``sample(size, rng)``),
    fits the MLE and records the relative likelihood at ``theta``. Replicates
    whose MLE is undefined are redrawn.

    Raises
    ------
    DegenerateConfigurationError
        After ``config.M`` consecutive degenerate replicates.
    """
    family = as_family(model)
    theta = check_theta(family, theta)
    side = as_side(side)
    M = config.M
    key = tuple(int(k) for k in stream_key)
    rng = stream(config.seed, *key)

    def draw(rows: int):
        x = quantile(family, theta, _uniforms(rng, (rows, n)))
        c = ghat.sample((rows, n), rng)
        t, d = combine(x, c, side)
        r, status, _, _ = kernels.relative_likelihoods(family, side, t, d, theta, backend)
        return r, status, d

    r, status, d = draw(M)
    good = status != kernels.STATUS_DEGENERATE
    run = _longest_failure_run(good, 0)
    attempts, accepted = M, int(good.sum())
    draws = [r[good]]
    statuses = [status[good]]
    censored = [1.0 - d[good].mean(axis=1)]
    trailing = _trailing_failures(good)
    while accepted < M:
        if run >= M:
            raise DegenerateConfigurationError(
                f"{M} consecutive simulated datasets had no interior MLE at theta={theta.tolist()}"
            )
        need = M - accepted
        rate = max(accepted / attempts, 1.0 / M)
        rows = int(min(max(need, math.ceil(1.2 * need / rate)), 50 * M))
        r, status, d = draw(rows)
        good = status != kernels.STATUS_DEGENERATE
        run = max(run, _longest_failure_run(good, trailing))
        trailing = _trailing_failures(good, trailing)
        idx = np.flatnonzero(good)[:need]
        draws.append(r[idx])
        statuses.append(status[idx])
        censored.append(1.0 - d[idx].mean(axis=1))
        attempts += rows if idx.size < need else int(idx[-1]) + 1
        accepted += idx.size

    values = np.sort(np.concatenate(draws))
    all_status = np.concatenate(statuses)
    return EmpiricalRLDistribution(
        theta=theta,
        draws=values,
        seed=config.seed,
        stream_key=key,
        rejections=attempts - M,
        not_converged=int(np.sum(all_status == kernels.STATUS_NOT_CONVERGED)),
        censored_fraction=float(np.concatenate(censored).mean()),
    )


def _longest_failure_run(good: np.ndarray, carry: int) -> int:
    longest = current = carry
    for ok in good:
        current = 0 if ok else current + 1
        longest = max(longest, current)
    return longest


def _trailing_failures(good: np.ndarray, carry: int = 0) -> int:
    hits = np.flatnonzero(good)
    return carry + good.size if hits.size == 0 else good.size - 1 - int(hits[-1])


# ---------------------------------------------------------------------------
# grids


def axis_values(lower: float, upper: float, size: int, log_scale: bool, anchor: float | None = None):
    """Evenly spaced axis (in log scale if requested) that contains ``anchor`` exactly."""
    if size < 1 or not lower <= upper:
        raise ValueError("need size >= 1 and lower <= upper")
    if log_scale and lower <= 0:
        raise ValueError("log-spaced axis needs a positive lower bound")
    fwd = np.log if log_scale else (lambda v: v)
    inv = np.exp if log_scale else (lambda v: v)
    a, b = fwd(lower), fwd(upper)
    if size == 1:
        return np.array([anchor if anchor is not None else lower], dtype=float)
    if anchor is None or not lower < anchor < upper:
        values = inv(np.linspace(a, b, size))
        values[0], values[-1] = lower, upper
        return values
    c = fwd(anchor)
    below = int(round((size - 1) * (c - a) / (b - a)))
    below = min(max(below, 1), size - 2)
    values = np.concatenate((inv(np.linspace(a, c, below + 1)), inv(np.linspace(c, b, size - below))[1:]))
    values[0], values[below], values[-1] = lower, anchor, upper
    return values


def product_grid(axes: Sequence[np.ndarray]) -> np.ndarray:
    """Cartesian product with the last axis varying fastest."""
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def default_grid_spec(model, data: SurvivalDataset, mle: MleResult) -> list[dict]:
    """Axis descriptions for the default grid around ``mle``.

    Positive parameters are log-spaced over ``estimate * [0.2, 3]`` (one
    parameter, 201 points) or ``estimate * [0.3, 3]`` (two parameters, 61 per
    axis). An unconstrained location parameter spans four Wald standard
    errors either side. Every axis contains the MLE coordinate exactly.
    """
    family = as_family(model)
    est = mle.estimate
    if family.dim == 1:
        lo, hi = DEFAULT_1D_RANGE
        return [_axis_dict(family.param_names[0], est[0] * lo, est[0] * hi, DEFAULT_1D_SIZE, True, est[0])]
    lo, hi = DEFAULT_2D_RANGE
    spec = []
    for i, (name, pos) in enumerate(zip(family.param_names, family.positive)):
        if pos:
            spec.append(_axis_dict(name, est[i] * lo, est[i] * hi, DEFAULT_2D_SIZE, True, est[i]))
        else:
            half = LOCATION_HALF_WIDTH_SE * _location_se(family, data, mle, i)
            spec.append(_axis_dict(name, est[i] - half, est[i] + half, DEFAULT_2D_SIZE, False, est[i]))
    return spec


def _location_se(family, data, mle, i) -> float:
    from .harness import observed_information

    info = observed_information(family, data, mle.estimate)
    try:
        cov = np.linalg.inv(info)
        se = math.sqrt(cov[i, i]) if cov[i, i] > 0 else float("nan")
    except np.linalg.LinAlgError:
        se = float("nan")
    if not np.isfinite(se):
        # fall back on the sdlog estimate as a scale for the location
        se = 1.5 * mle.estimate[-1] / LOCATION_HALF_WIDTH_SE
    return se


def _axis_dict(name, lower, upper, size, log_scale, anchor=None) -> dict:
    out = {"name": name, "lower": float(lower), "upper": float(upper), "size": int(size), "log": bool(log_scale)}
    if anchor is not None:
        out["anchor"] = float(anchor)
    return out


def grid_from_spec(spec: Sequence[dict]) -> np.ndarray:
    axes = [
        axis_values(a["lower"], a["upper"], a["size"], a.get("log", False), a.get("anchor"))
        for a in spec
    ]
    return product_grid(axes)


# ---------------------------------------------------------------------------
# contour


@dataclass(frozen=True, eq=False)
class PlausibilityCurve:
    """Plausibility values on a grid of parameter vectors (rows of ``grid``)."""

    grid: np.ndarray
    values: np.ndarray
    mle: MleResult
    config: MonteCarloConfig
    model: Family
    side: Side = Side.RIGHT
    param_names: tuple[str, ...] = ()
    estimate: np.ndarray | None = None
    grid_spec: list | None = None
    rejections: np.ndarray | None = None
    functional: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.grid.shape[1]

    def to_dict(self) -> dict:
        from . import __version__

        def num(v):
            return None if not np.isfinite(v) else float(v)

        return {
            "version": __version__,
            "model": self.model.value,
            "censoring": self.side.value,
            "functional": self.functional,
            "parameters": list(self.param_names),
            "grid": [[float(v) for v in row] for row in self.grid],
            "plausibility": [num(v) for v in self.values],
            "estimate": None if self.estimate is None else [float(v) for v in self.estimate],
            "mle": self.mle.to_dict(),
            "grid_spec": self.grid_spec,
            "M": self.config.M,
            "seed": self.config.seed,
            **self.extra,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(list(self.param_names) + ["plausibility"]) + "\n")
        for row, v in zip(self.grid, self.values):
            cells = [repr(float(x)) for x in row] + ["" if not np.isfinite(v) else repr(float(v))]
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()


def _evaluate_points(args) -> tuple[np.ndarray, np.ndarray]:
    model, side, thetas, indices, robs, ghat, n, config, backend = args
    values = np.empty(len(indices))
    rejections = np.zeros(len(indices), dtype=np.int64)
    for j, (g, theta, r) in enumerate(zip(indices, thetas, robs)):
        try:
            dist = simulate_rl_distribution(model, theta, ghat, n, config, side, (int(g),), backend)
        except DegenerateConfigurationError as exc:
            log.info("grid point %d skipped: %s", g, exc)
            values[j] = np.nan
            rejections[j] = -1
            continue
        values[j] = evaluate_cdf(dist, r)
        rejections[j] = dist.rejections
    return values, rejections


def evaluate_plausibility(
    model,
    side,
    thetas: np.ndarray,
    robs: np.ndarray,
    ghat,
    n: int,
    config: MonteCarloConfig,
    indices: Sequence[int] | None = None,
    backend: str | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Contour values at ``thetas`` given observed relative likelihoods ``robs``.

    Point ``thetas[j]`` uses stream key ``indices[j]`` (default ``j``). Points
    where simulation is degenerate get NaN and a rejection count of -1.
    """
    family = as_family(model)
    thetas = np.asarray(thetas, dtype=float).reshape(len(robs), family.dim)
    indices = np.arange(len(thetas)) if indices is None else np.asarray(indices)
    backend = backend or kernels.get_backend()
    workers = min(config.parallel_workers, len(thetas))
    if workers <= 1:
        return _evaluate_points((family, side, thetas, indices, robs, ghat, n, config, backend))
    chunks = np.array_split(np.arange(len(thetas)), 4 * workers)
    jobs = [
        (family, side, thetas[c], indices[c], np.asarray(robs)[c], ghat, n, config, backend)
        for c in chunks
        if c.size
    ]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_evaluate_points, jobs))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def plausibility_contour(
    model,
    data: SurvivalDataset,
    grid=None,
    config: MonteCarloConfig | None = None,
    ghat=None,
    backend: str | None = None,
) -> PlausibilityCurve:
    """Plausibility contour of ``model`` on ``grid`` given ``data``.

    ``ghat`` defaults to the reversed product-limit estimate from ``data``;
    pass a known censoring law to bypass estimation. ``grid`` may be a list of
    parameter vectors, a ``(G, dim)`` array, a list of axis dicts (see
    :func:`grid_from_spec`), or ``None`` for :func:`default_grid_spec`.

    Raises
    ------
    DegenerateDataError
        If the MLE on ``data`` is undefined.
    """
    family = as_family(model)
    config = config or MonteCarloConfig()
    mle = fit_mle(family, data)
    if ghat is None:
        ghat = reversed_kaplan_meier(data)

    spec = None
    if grid is None:
        spec = default_grid_spec(family, data, mle)
        grid = grid_from_spec(spec)
    elif len(grid) and isinstance(grid[0], dict):
        spec = list(grid)
        grid = grid_from_spec(spec)
    grid = np.asarray(grid, dtype=float).reshape(-1, family.dim)
    if grid.shape[0] == 0:
        raise ValueError("grid is empty")
    for theta in grid:
        check_theta(family, theta)

    robs = np.array([relative_likelihood(family, data, th, mle) for th in grid])
    values, rejections = evaluate_plausibility(
        family, data.side, grid, robs, ghat, data.n, config, backend=backend
    )
    return PlausibilityCurve(
        grid=grid,
        values=values,
        mle=mle,
        config=config,
        model=family,
        side=data.side,
        param_names=family.param_names,
        estimate=mle.estimate,
        grid_spec=spec,
        rejections=rejections,
    )


# ---------------------------------------------------------------------------
# regions and marginals


@dataclass(frozen=True, eq=False)
class PlausibilityRegion:
    alpha: float
    members: np.ndarray
    mask: np.ndarray
    interval: tuple[float, float] | None
    param_names: tuple[str, ...] = ()

    @property
    def empty(self) -> bool:
        return self.members.shape[0] == 0

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "parameters": list(self.param_names),
            "members": [[float(v) for v in row] for row in self.members],
            "interval": None if self.interval is None else [float(v) for v in self.interval],
            "empty": self.empty,
        }


def plausibility_region(curve: PlausibilityCurve, alpha: float) -> PlausibilityRegion:
    """Grid points with plausibility strictly above ``alpha``.

    For one-dimensional curves the region also reports the hull
    ``(min, max)`` of its members; an empty region gives ``interval=None``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    with np.errstate(invalid="ignore"):
        mask = np.asarray(curve.values > alpha)
    members = curve.grid[mask]
    interval = None
    if curve.dim == 1 and members.size:
        interval = (float(members[:, 0].min()), float(members[:, 0].max()))
    return PlausibilityRegion(float(alpha), members, mask, interval, curve.param_names)


def _bin_edges(psi_grid: np.ndarray) -> np.ndarray:
    if psi_grid.size == 1:
        return np.array([-np.inf, np.inf])
    mid = 0.5 * (psi_grid[1:] + psi_grid[:-1])
    first = psi_grid[0] - (mid[0] - psi_grid[0])
    last = psi_grid[-1] + (psi_grid[-1] - mid[-1])
    return np.concatenate(([first], mid, [last]))


def marginal_plausibility(
    curve: PlausibilityCurve,
    psi: Callable[[np.ndarray], float],
    psi_grid,
    name: str = "psi",
) -> PlausibilityCurve:
    """Consonant marginal plausibility of the scalar ``psi(theta)``.

    Each ``psi_grid`` value owns the bin between the midpoints to its
    neighbours; its marginal plausibility is the largest contour value among
    grid points whose ``psi`` lands in that bin. Bins without grid points are
    reported as NaN (missing), not zero.
    """
    psi_grid = np.sort(np.asarray(psi_grid, dtype=float).ravel())
    if psi_grid.size == 0:
        raise ValueError("psi_grid is empty")
    psi_values = np.array([float(psi(theta)) for theta in curve.grid])
    edges = _bin_edges(psi_grid)
    bins = np.searchsorted(edges, psi_values, side="right") - 1
    out = np.full(psi_grid.size, np.nan)
    for b, v in zip(bins, curve.values):
        if 0 <= b < psi_grid.size and np.isfinite(v):
            if not v <= out[b]:
                out[b] = v
    estimate = np.array([float(psi(curve.mle.estimate))])
    return PlausibilityCurve(
        grid=psi_grid[:, None],
        values=out,
        mle=curve.mle,
        config=curve.config,
        model=curve.model,
        side=curve.side,
        param_names=(name,),
        estimate=estimate,
        grid_spec=None,
        functional=name,
        extra={"source_grid_spec": curve.grid_spec},
    )


def lognormal_mean(theta) -> float:
    """Mean of the log-normal distribution, ``exp(meanlog + sdlog**2 / 2)``."""
    mu, sigma = theta
    return math.exp(mu + 0.5 * sigma * sigma)


FUNCTIONALS = {"lognormal-mean": (Family.LOGNORMAL, lognormal_mean)}


def default_psi_grid(curve: PlausibilityCurve, psi, size: int = 101, log_scale: bool = True) -> np.ndarray:
    """Axis over the range of ``psi`` on the curve's grid, anchored at ``psi(mle)``.

    Only grid points with plausibility above 0.001 determine the range, so the
    axis resolves the region where the marginal is not negligible.
    """
    vals = np.array([psi(theta) for theta in curve.grid])
    keep = np.nan_to_num(curve.values) > 1e-3
    if keep.sum() >= 2:
        vals = vals[keep]
    lo, hi = float(vals.min()), float(vals.max())
    center = float(psi(curve.mle.estimate))
    lo, hi = min(lo, center), max(hi, center)
    if log_scale and lo <= 0:
        log_scale = False
    return axis_values(lo, hi, size, log_scale, center)


def curve_from_dict(payload: dict) -> PlausibilityCurve:
    """Rebuild a curve from :meth:`PlausibilityCurve.to_dict` output."""
    family = as_family(payload["model"])
    mle = payload["mle"]
    values = np.array([np.nan if v is None else v for v in payload["plausibility"]], dtype=float)
    estimate = payload.get("estimate")
    return PlausibilityCurve(
        grid=np.asarray(payload["grid"], dtype=float),
        values=values,
        mle=MleResult(np.asarray(mle["estimate"], dtype=float), mle["loglik"], mle["converged"], mle["iterations"]),
        config=MonteCarloConfig(M=int(payload["M"]), seed=int(payload["seed"])),
        model=family,
        side=as_side(payload.get("censoring", "right")),
        param_names=tuple(payload.get("parameters") or family.param_names),
        estimate=None if estimate is None else np.asarray(estimate, dtype=float),
        grid_spec=payload.get("grid_spec"),
        functional=payload.get("functional"),
    )
