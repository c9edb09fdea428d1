# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch kernel: fit the MLE on each replicate row, return relative likelihoods.

Mirrors ``_fallback.relative_likelihoods``. Rows are independent simulated
datasets of equal size; ``status`` codes are 0 (ok), 1 (degenerate data,
MLE undefined) and 2 (simplex did not converge; the best vertex is used).
"""

import numpy as np

from libc.math cimport log, exp, expm1, sqrt, fabs, INFINITY, isfinite
from libc.stdlib cimport malloc, free, qsort
from scipy.special.cython_special cimport log_ndtr

cdef double HALF_LOG_2PI = 0.91893853320467274178
cdef double FATOL = 1e-8
cdef double XATOL = 1e-6
cdef int MAXITER = 500
cdef double STEP = 0.1

cdef enum:
    EXPONENTIAL = 0
    WEIBULL = 1
    LOGNORMAL = 2

cdef enum:
    RIGHT = 0
    LEFT = 1


cdef struct Row:
    int family
    int side
    int n
    int k
    double sum_t_exact
    double sum_logt_exact
    double mean_logt_exact
    double ss_logt_exact
    double *logt_exact
    int nc
    double *ct
    double *clogt
    double *ccount


cdef int _cmp_double(const void *a, const void *b) noexcept nogil:
    cdef double x = (<const double *> a)[0]
    cdef double y = (<const double *> b)[0]
    if x < y:
        return -1
    if x > y:
        return 1
    return 0


cdef void _prepare(Row *row, const double[::1] t, const signed char[::1] d,
                   double *scratch) noexcept nogil:
    cdef int i, j, m = 0, k = 0
    cdef double s = 0.0, sl = 0.0, mean, ss = 0.0, lt
    for i in range(row.n):
        if d[i]:
            lt = log(t[i])
            row.logt_exact[k] = lt
            s += t[i]
            sl += lt
            k += 1
        else:
            scratch[m] = t[i]
            m += 1
    row.k = k
    row.sum_t_exact = s
    row.sum_logt_exact = sl
    mean = sl / k if k > 0 else 0.0
    for i in range(k):
        ss += (row.logt_exact[i] - mean) * (row.logt_exact[i] - mean)
    row.mean_logt_exact = mean
    row.ss_logt_exact = ss
    # compress censored times into (value, multiplicity)
    qsort(scratch, m, sizeof(double), _cmp_double)
    j = -1
    for i in range(m):
        if j >= 0 and scratch[i] == row.ct[j]:
            row.ccount[j] += 1.0
        else:
            j += 1
            row.ct[j] = scratch[i]
            row.clogt[j] = log(scratch[i])
            row.ccount[j] = 1.0
    row.nc = j + 1


cdef double _loglik(const Row *row, double p0, double p1) noexcept nogil:
    cdef int i
    cdef double ll = 0.0, z, h, acc = 0.0
    cdef int k = row.k
    if row.family == EXPONENTIAL:
        ll = k * log(p0) - p0 * row.sum_t_exact
        if row.side == RIGHT:
            for i in range(row.nc):
                acc += row.ccount[i] * row.ct[i]
            ll -= p0 * acc
        else:
            for i in range(row.nc):
                ll += row.ccount[i] * log(-expm1(-p0 * row.ct[i]))
        return ll
    if row.family == WEIBULL:
        for i in range(k):
            acc += exp(p0 * row.logt_exact[i])
        ll = k * (log(p1) + log(p0)) + (p0 - 1.0) * row.sum_logt_exact - p1 * acc
        for i in range(row.nc):
            h = p1 * exp(p0 * row.clogt[i])
            if row.side == RIGHT:
                ll -= row.ccount[i] * h
            else:
                ll += row.ccount[i] * log(-expm1(-h))
        return ll
    # log-normal, p0 = meanlog, p1 = sdlog
    z = row.mean_logt_exact - p0
    ll = (-k * (HALF_LOG_2PI + log(p1)) - row.sum_logt_exact
          - 0.5 * (row.ss_logt_exact + k * z * z) / (p1 * p1))
    for i in range(row.nc):
        z = (row.clogt[i] - p0) / p1
        if row.side == RIGHT:
            ll += row.ccount[i] * log_ndtr(-z)
        else:
            ll += row.ccount[i] * log_ndtr(z)
    return ll


cdef double _objective(const Row *row, const double *u, int dim) noexcept nogil:
    cdef double p0, p1 = 0.0, v
    if row.family == LOGNORMAL:
        p0 = u[0]
    else:
        p0 = exp(u[0])
    if dim == 2:
        p1 = exp(u[1])
    v = -_loglik(row, p0, p1)
    if not isfinite(v):
        return INFINITY
    return v


cdef int _nelder_mead(const Row *row, double *x, int dim, double *fbest,
                      int *converged) noexcept nogil:
    """Same iteration as optimize.nelder_mead; x holds the start and the result."""
    cdef double sim[3][2]
    cdef double fsim[3]
    cdef double xbar[2]
    cdef double xr[2]
    cdef double xe[2]
    cdef double xc[2]
    cdef double tmpx[2]
    cdef double fr, fe, fc, tmpf
    cdef int i, j, c, it = 0, npts = dim + 1, worst = dim, ok, shrink
    for i in range(npts):
        for j in range(dim):
            sim[i][j] = x[j]
        if i > 0:
            sim[i][i - 1] += STEP
        fsim[i] = _objective(row, sim[i], dim)
    while True:
        # stable insertion sort by objective value
        for i in range(1, npts):
            tmpf = fsim[i]
            for j in range(dim):
                tmpx[j] = sim[i][j]
            j = i - 1
            while j >= 0 and fsim[j] > tmpf:
                fsim[j + 1] = fsim[j]
                sim[j + 1][0] = sim[j][0]
                sim[j + 1][1] = sim[j][1]
                j -= 1
            fsim[j + 1] = tmpf
            for c in range(dim):
                sim[j + 1][c] = tmpx[c]
        ok = 1
        for i in range(1, npts):
            if not (fabs(fsim[i] - fsim[0]) <= FATOL):
                ok = 0
            for j in range(dim):
                if not (fabs(sim[i][j] - sim[0][j]) <= XATOL):
                    ok = 0
        if ok or it >= MAXITER:
            for j in range(dim):
                x[j] = sim[0][j]
            fbest[0] = fsim[0]
            converged[0] = ok
            return it
        it += 1

        for j in range(dim):
            xbar[j] = 0.0
            for i in range(dim):
                xbar[j] += sim[i][j]
            xbar[j] /= dim
            xr[j] = xbar[j] + (xbar[j] - sim[worst][j])
        fr = _objective(row, xr, dim)
        if fr < fsim[0]:
            for j in range(dim):
                xe[j] = xbar[j] + 2.0 * (xr[j] - xbar[j])
            fe = _objective(row, xe, dim)
            if fe < fr:
                for j in range(dim):
                    sim[worst][j] = xe[j]
                fsim[worst] = fe
            else:
                for j in range(dim):
                    sim[worst][j] = xr[j]
                fsim[worst] = fr
            continue
        if fr < fsim[worst - 1]:
            for j in range(dim):
                sim[worst][j] = xr[j]
            fsim[worst] = fr
            continue
        shrink = 1
        if fr < fsim[worst]:
            for j in range(dim):
                xc[j] = xbar[j] + 0.5 * (xr[j] - xbar[j])
            fc = _objective(row, xc, dim)
            if fc <= fr:
                shrink = 0
        else:
            for j in range(dim):
                xc[j] = xbar[j] + 0.5 * (sim[worst][j] - xbar[j])
            fc = _objective(row, xc, dim)
            if fc < fsim[worst]:
                shrink = 0
        if not shrink:
            for j in range(dim):
                sim[worst][j] = xc[j]
            fsim[worst] = fc
            continue
        for i in range(1, npts):
            for j in range(dim):
                sim[i][j] = sim[0][j] + 0.5 * (sim[i][j] - sim[0][j])
            fsim[i] = _objective(row, sim[i], dim)


cdef int _fit(Row *row, double *est, double *llhat, int *iters) noexcept nogil:
    """Returns a status code; fills est (natural scale) and llhat."""
    cdef int dim = 1 if row.family == EXPONENTIAL else 2
    cdef int converged = 1
    cdef double u[2]
    cdef double f, rate, sd
    iters[0] = 0
    if row.k == 0:
        return 1
    if dim == 2:
        if row.k < 2:
            return 1
        if row.ss_logt_exact == 0.0:
            return 1
    rate = row.k / (row.sum_t_exact + _censored_time_sum(row))
    if row.family == EXPONENTIAL and (row.side == RIGHT or row.nc == 0):
        est[0] = rate
        llhat[0] = _loglik(row, rate, 0.0)
        return 0
    if row.family == EXPONENTIAL:
        u[0] = log(rate)
    elif row.family == WEIBULL:
        u[0] = 0.0
        u[1] = log(rate)
    else:
        sd = sqrt(row.ss_logt_exact / (row.k - 1))
        u[0] = row.mean_logt_exact
        u[1] = log(sd) if sd > 0 else 0.0
    iters[0] = _nelder_mead(row, u, dim, &f, &converged)
    if row.family == LOGNORMAL:
        est[0] = u[0]
    else:
        est[0] = exp(u[0])
    if dim == 2:
        est[1] = exp(u[1])
    llhat[0] = -f
    return 0 if converged else 2


cdef double _censored_time_sum(const Row *row) noexcept nogil:
    cdef int i
    cdef double acc = 0.0
    for i in range(row.nc):
        acc += row.ccount[i] * row.ct[i]
    return acc


def relative_likelihoods(int family, int side, double[:, ::1] T, signed char[:, ::1] D,
                         theta):
    """Fit every row of ``(T, D)`` and evaluate its relative likelihood at ``theta``.

    Returns ``(R, status, estimates, iterations)``.
    """
    cdef Py_ssize_t M = T.shape[0]
    cdef int n = <int> T.shape[1]
    cdef int dim = 1 if family == EXPONENTIAL else 2
    cdef double th0 = float(theta[0])
    cdef double th1 = float(theta[1]) if dim == 2 else 0.0
    R_arr = np.empty(M, dtype=np.float64)
    st_arr = np.empty(M, dtype=np.int8)
    est_arr = np.full((M, dim), np.nan, dtype=np.float64)
    it_arr = np.zeros(M, dtype=np.int32)
    cdef double[::1] R = R_arr
    cdef signed char[::1] st = st_arr
    cdef double[:, ::1] est = est_arr
    cdef int[::1] its = it_arr
    cdef Row row
    cdef double *buf = <double *> malloc(5 * (n + 1) * sizeof(double))
    cdef double llhat, llth, r
    cdef double e[2]
    cdef int status, it
    cdef Py_ssize_t m
    if buf == NULL:
        raise MemoryError()
    row.family = family
    row.side = side
    row.n = n
    row.logt_exact = buf
    row.ct = buf + (n + 1)
    row.clogt = buf + 2 * (n + 1)
    row.ccount = buf + 3 * (n + 1)
    try:
        with nogil:
            for m in range(M):
                _prepare(&row, T[m], D[m], buf + 4 * (n + 1))
                status = _fit(&row, e, &llhat, &it)
                st[m] = status
                its[m] = it
                if status == 1:
                    R[m] = -1.0
                    continue
                est[m, 0] = e[0]
                if dim == 2:
                    est[m, 1] = e[1]
                llth = _loglik(&row, th0, th1)
                r = exp(llth - llhat)
                if not (r <= 1.0):
                    r = 1.0 if r > 1.0 else 0.0
                R[m] = r
    finally:
        free(buf)
    return R_arr, st_arr, est_arr, it_arr
