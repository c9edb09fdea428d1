"""Derivative-free simplex minimization.

The compiled kernel in ``_kernels.pyx`` implements the same iteration step
for step, so both backends follow identical search paths up to floating-point
differences in the objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

FATOL = 1e-8
XATOL = 1e-6
MAXITER = 500
INITIAL_STEP = 0.1

# reflection, expansion, contraction, shrink
_RHO, _CHI, _GAMMA, _SIGMA = 1.0, 2.0, 0.5, 0.5


@dataclass(frozen=True)
class SimplexResult:
    x: np.ndarray
    fun: float
    converged: bool
    iterations: int


def _safe(value: float) -> float:
    return value if np.isfinite(value) else np.inf


def nelder_mead(
    fun: Callable[[np.ndarray], float],
    x0,
    step: float = INITIAL_STEP,
    fatol: float = FATOL,
    xatol: float = XATOL,
    maxiter: int = MAXITER,
) -> SimplexResult:
    """Minimize ``fun`` with the Nelder-Mead simplex method.

    The initial simplex is ``x0`` plus ``step`` along each coordinate axis.
    Iteration stops once every vertex is within ``fatol`` of the best
    objective value and within ``xatol`` of the best vertex (max-norm), or
    after ``maxiter`` iterations. Non-finite objective values are treated
    as ``+inf``.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    dim = x0.size
    sim = np.tile(x0, (dim + 1, 1))
    for i in range(dim):
        sim[i + 1, i] += step
    fsim = np.array([_safe(fun(v)) for v in sim])

    def _converged() -> bool:
        return (
            np.max(np.abs(fsim[1:] - fsim[0])) <= fatol
            and np.max(np.abs(sim[1:] - sim[0])) <= xatol
        )

    iterations = 0
    while True:
        order = np.argsort(fsim, kind="stable")
        sim, fsim = sim[order], fsim[order]
        if _converged():
            return SimplexResult(sim[0].copy(), float(fsim[0]), True, iterations)
        if iterations >= maxiter:
            return SimplexResult(sim[0].copy(), float(fsim[0]), False, iterations)
        iterations += 1

        xbar = sim[:-1].mean(axis=0)
        xr = xbar + _RHO * (xbar - sim[-1])
        fr = _safe(fun(xr))
        if fr < fsim[0]:
            xe = xbar + _CHI * (xr - xbar)
            fe = _safe(fun(xe))
            if fe < fr:
                sim[-1], fsim[-1] = xe, fe
            else:
                sim[-1], fsim[-1] = xr, fr
            continue
        if fr < fsim[-2]:
            sim[-1], fsim[-1] = xr, fr
            continue
        if fr < fsim[-1]:
            xc = xbar + _GAMMA * (xr - xbar)
            fc = _safe(fun(xc))
            if fc <= fr:
                sim[-1], fsim[-1] = xc, fc
                continue
        else:
            xc = xbar + _GAMMA * (sim[-1] - xbar)
            fc = _safe(fun(xc))
            if fc < fsim[-1]:
                sim[-1], fsim[-1] = xc, fc
                continue
        for j in range(1, dim + 1):
            sim[j] = sim[0] + _SIGMA * (sim[j] - sim[0])
            fsim[j] = _safe(fun(sim[j]))
