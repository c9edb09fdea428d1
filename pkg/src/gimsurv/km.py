"""Product-limit estimation and sampling from step distributions.

``reversed_kaplan_meier`` estimates the *censoring* distribution by swapping
the event and censoring labels before running the usual product-limit
estimator. Any mass the estimator cannot place on observed times is kept as a
boundary atom: at ``+inf`` for right-censored data and at ``0`` for
left-censored data (which is handled on the reflected axis ``t -> -t``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .models import Side, SurvivalDataset


class Atom(str, enum.Enum):
    NONE = "none"
    INFINITY = "+inf"
    ZERO = "0"


@dataclass(frozen=True, eq=False)
class StepDistribution:
    """Right-continuous step survival function with an optional boundary atom.

    ``survival_values[k]`` is ``P(C > t)`` for ``t`` in
    ``[jump_points[k], jump_points[k + 1])``. Mass not assigned to any jump
    point sits at ``atom_location`` with weight ``atom_mass``.
    """

    jump_points: np.ndarray
    survival_values: np.ndarray
    atom_mass: float = 0.0
    atom_location: Atom = Atom.NONE

    def __post_init__(self):
        pts = np.array(self.jump_points, dtype=float).ravel()
        surv = np.array(self.survival_values, dtype=float).ravel()
        loc = Atom(self.atom_location)
        mass = float(self.atom_mass)
        if pts.shape != surv.shape:
            raise ValueError("jump_points and survival_values differ in length")
        if np.any(pts <= 0) or np.any(np.diff(pts) <= 0):
            raise ValueError("jump points must be positive and strictly increasing")
        if np.any(surv < 0) or np.any(surv > 1) or np.any(np.diff(surv) > 0):
            raise ValueError("survival values must be non-increasing within [0, 1]")
        if not 0.0 <= mass <= 1.0:
            raise ValueError("atom mass must lie in [0, 1]")
        if loc is Atom.NONE and mass != 0.0:
            raise ValueError("atom mass given without a location")
        if loc is Atom.INFINITY:
            tail = surv[-1] if surv.size else 1.0
            if tail != mass:
                raise ValueError("last survival value must equal the mass at +inf")
        elif surv.size and surv[-1] != 0.0:
            raise ValueError("survival must reach 0 without an atom at +inf")
        if loc is not Atom.INFINITY and pts.size == 0 and mass != 1.0:
            raise ValueError("distribution carries no mass")
        pts.flags.writeable = False
        surv.flags.writeable = False
        object.__setattr__(self, "jump_points", pts)
        object.__setattr__(self, "survival_values", surv)
        object.__setattr__(self, "atom_mass", mass)
        object.__setattr__(self, "atom_location", loc)

    @property
    def _initial_survival(self) -> float:
        return 1.0 - self.atom_mass if self.atom_location is Atom.ZERO else 1.0

    @property
    def point_masses(self) -> np.ndarray:
        prev = np.concatenate(([self._initial_survival], self.survival_values[:-1]))
        return prev - self.survival_values

    def survival(self, t):
        """``P(C > t)`` for non-negative ``t``."""
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.jump_points, t, side="right") - 1
        values = np.concatenate(([self._initial_survival], self.survival_values))
        return values[k + 1]

    def cdf(self, t):
        return 1.0 - self.survival(t)

    def _support_and_cdf(self) -> tuple[np.ndarray, np.ndarray]:
        support = self.jump_points
        cdf = 1.0 - self.survival_values
        if self.atom_location is Atom.ZERO:
            support = np.concatenate(([0.0], support))
            cdf = np.concatenate(([self.atom_mass], cdf))
        if self.atom_location is not Atom.INFINITY and cdf.size:
            cdf = cdf.copy()
            cdf[-1] = 1.0
        return support, cdf

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        """Inverse-CDF draws using ``inf{t : F(t) >= u}``; +inf for the top atom."""
        return self.quantile(rng.random(size))

    def quantile(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        support, cdf = self._support_and_cdf()
        idx = np.searchsorted(cdf, u, side="left")
        out = np.append(support, np.inf)
        return out[idx]

    def to_dict(self) -> dict:
        return {
            "jump_points": self.jump_points.tolist(),
            "survival_values": self.survival_values.tolist(),
            "atom": {"location": self.atom_location.value, "mass": self.atom_mass},
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "StepDistribution":
        atom = payload.get("atom", {})
        return cls(
            payload["jump_points"],
            payload["survival_values"],
            atom.get("mass", 0.0),
            Atom(atom.get("location", "none")),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepDistribution):
            return NotImplemented
        return (
            np.array_equal(self.jump_points, other.jump_points)
            and np.array_equal(self.survival_values, other.survival_values)
            and self.atom_mass == other.atom_mass
            and self.atom_location is other.atom_location
        )

    __hash__ = None


def product_limit(times, events) -> tuple[np.ndarray, np.ndarray]:
    """Distinct event times and the product-limit survival just after each.

    Censorings tied with events at the same time are counted in the risk set
    at that time (events precede censorings).
    """
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=np.int64)
    order = np.argsort(times, kind="stable")
    t, e = times[order], events[order]
    uniq, first = np.unique(t, return_index=True)
    n_events = np.add.reduceat(e, first)
    at_risk = t.size - first
    keep = n_events > 0
    factors = 1.0 - n_events[keep] / at_risk[keep]
    return uniq[keep], np.cumprod(factors)


def kaplan_meier(data: SurvivalDataset) -> StepDistribution:
    """Product-limit estimate of the distribution of the labelled events.

    For right-censored data this is the usual survival estimate, with any
    residual mass placed at ``+inf``. Left-censored data are estimated on the
    reflected axis, so the residual mass lands at ``0``.
    """
    if data.side is Side.RIGHT:
        pts, surv = product_limit(data.time, data.status)
        tail = float(surv[-1]) if surv.size else 1.0
        if tail > 0.0:
            return StepDistribution(pts, surv, tail, Atom.INFINITY)
        return StepDistribution(pts, surv)

    refl_pts, refl_surv = product_limit(-data.time, data.status)
    prev = np.concatenate(([1.0], refl_surv[:-1]))
    masses = (prev - refl_surv)[::-1]
    pts = -refl_pts[::-1]
    tail = float(refl_surv[-1]) if refl_surv.size else 1.0
    surv = np.concatenate((np.cumsum(masses[::-1])[::-1][1:], [0.0])) if pts.size else pts
    if tail > 0.0:
        return StepDistribution(pts, surv, tail, Atom.ZERO)
    return StepDistribution(pts, surv)


def reversed_kaplan_meier(data: SurvivalDataset) -> StepDistribution:
    """Product-limit estimate of the censoring distribution (labels swapped)."""
    return kaplan_meier(data.flipped())


def sample(dist: StepDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be at least 1")
    return dist.sample(n, rng)
