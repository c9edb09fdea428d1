from pathlib import Path

import numpy as np
import pytest

from gimsurv import SurvivalDataset

DATA = Path(__file__).resolve().parents[1] / "src" / "gimsurv" / "data"


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_dataset(rng, n, side="right", family="exponential"):
    """Simulated censored sample with at least two distinct exact values."""
    while True:
        if family == "lognormal":
            x = rng.lognormal(0.0, 1.0, n)
        elif family == "weibull":
            x = rng.weibull(1.5, n)
        else:
            x = rng.exponential(1.0, n)
        c = rng.uniform(0.0, 3.0, n)
        if side == "right":
            t, d = np.minimum(x, c), (x <= c)
        else:
            t, d = np.maximum(x, c), (x >= c)
        if d.sum() >= 2 and np.unique(t[d]).size >= 2:
            return SurvivalDataset(t, d.astype(int), side)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
