"""Pure-Python twin of the compiled batch kernel in ``_kernels.pyx``."""

import numpy as np

from .exceptions import DegenerateDataError
from .models import Family, Side, _fit_arrays, _loglik_arrays

_FAMILIES = {f.code: f for f in Family}
_SIDES = {0: Side.RIGHT, 1: Side.LEFT}


def relative_likelihoods(family, side, T, D, theta):
    """Fit every row of ``(T, D)`` and evaluate its relative likelihood at ``theta``.

    Returns ``(R, status, estimates, iterations)`` with status 0 = ok,
    1 = degenerate row (R set to -1), 2 = simplex hit the iteration cap.
    """
    fam, sd = _FAMILIES[family], _SIDES[side]
    theta = np.asarray(theta, dtype=float)
    M = T.shape[0]
    R = np.empty(M)
    status = np.zeros(M, dtype=np.int8)
    est = np.full((M, fam.dim), np.nan)
    iters = np.zeros(M, dtype=np.int32)

    if fam is Family.EXPONENTIAL and sd is Side.RIGHT:
        k = D.sum(axis=1, dtype=np.int64)
        total = T.sum(axis=1)
        ok = k > 0
        rate = np.where(ok, k / total, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            logr = k * np.log(theta[0] / rate) - (theta[0] - rate) * total
        R[:] = np.minimum(np.exp(logr), 1.0)
        R[~ok] = -1.0
        status[~ok] = 1
        est[ok, 0] = rate[ok]
        return R, status, est, iters

    with np.errstate(all="ignore"):
        for m in range(M):
            try:
                fit = _fit_arrays(fam, sd, T[m], D[m])
            except DegenerateDataError:
                R[m] = -1.0
                status[m] = 1
                continue
            est[m] = fit.estimate
            iters[m] = fit.iterations
            status[m] = 0 if fit.converged else 2
            r = np.exp(_loglik_arrays(fam, sd, theta, T[m], D[m]) - fit.loglik)
            R[m] = min(r, 1.0) if r == r else 0.0
    return R, status, est, iters
