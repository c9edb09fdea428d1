"""Regenerate the bundled CSV fixtures in src/gimsurv/data.

atrazine.csv is a synthetic stand-in with the shape of the well-known
atrazine groundwater sample (24 wells, 11 below detection limits). Its
detected values are placed so that the left-censored log-normal MLE is
(meanlog -4.206, sdlog 1.462). pbc_like.csv and
ovarian_like.csv are simulated with the size and censoring counts of the
PBC (n=312, 168 censored) and ovarian (n=26, 14 censored) trial datasets.
"""

from pathlib import Path

import numpy as np
from scipy import optimize, special, stats

OUT = Path(__file__).resolve().parents[1] / "src" / "gimsurv" / "data"
MU, SIGMA = -4.206, 1.462
LIMITS = [0.01] * 10 + [0.05]
PBC_SEED = 20261016


def _lognormal_left_score(y, c, mu, sigma):
    z = (y - mu) / sigma
    zc = (np.log(c) - mu) / sigma
    mills = np.exp(stats.norm.logpdf(zc) - special.log_ndtr(zc))
    d_mu = z.sum() / sigma - mills.sum() / sigma
    d_sigma = (-y.size + (z * z).sum()) / sigma - (mills * zc).sum() / sigma
    return np.array([d_mu, d_sigma])


def atrazine():
    k = 24 - len(LIMITS)
    c = np.array(LIMITS)
    z = stats.norm.ppf((np.arange(1, k + 1) - 0.375) / (k + 0.25))
    z = (z - z.mean()) / z.std(ddof=0)

    def eqs(ab):
        return _lognormal_left_score(ab[0] + ab[1] * z, c, MU, SIGMA)

    a, b = optimize.fsolve(eqs, [MU + SIGMA, SIGMA])
    detected = np.round(np.exp(a + b * z), 4)
    assert detected.min() > min(LIMITS), detected.min()
    t = np.concatenate([c, detected])
    d = np.concatenate([np.zeros(c.size, int), np.ones(k, int)])
    return t, d


def _check_lognormal_left(t, d):
    y = np.log(t)

    def nll(p):
        mu, s = p[0], np.exp(p[1])
        z = (y - mu) / s
        return -(np.sum(d * (stats.norm.logpdf(z) - np.log(s))) + np.sum((1 - d) * special.log_ndtr(z)))

    res = optimize.minimize(nll, [y.mean(), 0.0], method="BFGS", options={"gtol": 1e-10})
    return res.x[0], np.exp(res.x[1])


def pbc_like():
    # scan seeds from PBC_SEED until exactly 168 of 312 are censored
    for seed in range(PBC_SEED, PBC_SEED + 10_000):
        rng = np.random.default_rng(seed)
        x = rng.exponential(3000.0, 312)
        c = rng.uniform(0.0, 4170.0, 312)
        d = (x <= c).astype(int)
        if (d == 0).sum() == 168:
            return np.round(np.minimum(x, c), 1), d, seed
    raise RuntimeError("no seed found")


def ovarian_like():
    for seed in range(PBC_SEED, PBC_SEED + 10_000):
        rng = np.random.default_rng(seed)
        x = 1500.0 * rng.weibull(1.1, 26)
        c = rng.uniform(350.0, 1250.0, 26)
        d = (x <= c).astype(int)
        if (d == 0).sum() == 14:
            return np.round(np.minimum(x, c), 0), d, seed
    raise RuntimeError("no seed found")


def write(name, t, d):
    lines = ["time,status"] + [f"{ti:g},{di}" for ti, di in zip(t, d)]
    (OUT / name).write_text("\n".join(lines) + "\n")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    t, d = atrazine()
    print("atrazine check (scipy BFGS):", _check_lognormal_left(t, d))
    write("atrazine.csv", t, d)
    t, d, seed = pbc_like()
    print("pbc_like seed", seed)
    write("pbc_like.csv", t, d)
    t, d, seed = ovarian_like()
    print("ovarian_like seed", seed)
    write("ovarian_like.csv", t, d)


if __name__ == "__main__":
    main()
