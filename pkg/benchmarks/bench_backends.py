"""Time the compiled and pure-Python relative-likelihood kernels on the same batches.

    python benchmarks/bench_backends.py --rows 300 --n 25
"""

import argparse
import timeit

import numpy as np

from gimsurv import kernels
from gimsurv.engine import combine
from gimsurv.models import Family, Side, quantile

CASES = [
    (Family.EXPONENTIAL, Side.RIGHT, [1.0]),
    (Family.EXPONENTIAL, Side.LEFT, [1.0]),
    (Family.WEIBULL, Side.RIGHT, [1.0, 1.0]),
    (Family.LOGNORMAL, Side.LEFT, [0.0, 1.0]),
]


def make_batch(family, side, theta, rows, n, seed):
    rng = np.random.default_rng(seed)
    x = quantile(family, theta, rng.random((rows, n)))
    c = rng.uniform(0.0, 2.5 * np.median(x), (rows, n))
    return combine(x, c, side)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=300, help="replicate datasets per batch (M)")
    parser.add_argument("--n", type=int, default=25, help="observations per dataset")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    backends = sorted(kernels.BACKENDS)
    print(f"rows={args.rows} n={args.n}; best of {args.repeat}, microseconds per fitted dataset")
    print(f"{'case':<22}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for family, side, theta in CASES:
        t, d = make_batch(family, side, theta, args.rows, args.n, seed=1)
        timings = {}
        for b in backends:
            run = lambda: kernels.relative_likelihoods(family, side, t, d, theta, backend=b)  # noqa: E731
            timings[b] = min(timeit.repeat(run, number=1, repeat=args.repeat)) / args.rows * 1e6
        line = f"{family.value + '/' + side.value:<22}" + "".join(f"{timings[b]:>12.1f}" for b in backends)
        if len(backends) > 1:
            line += f"{timings['python'] / timings['cython']:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
