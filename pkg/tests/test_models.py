import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize, stats

from gimsurv import DegenerateDataError, DomainError, SurvivalDataset, fit_mle
from gimsurv.exceptions import DataFormatError
from gimsurv.models import (
    Family,
    log_cdf,
    log_density,
    log_likelihood,
    log_survival,
    quantile,
    sample_event_times,
    score,
    to_unconstrained,
    from_unconstrained,
)

from conftest import random_dataset


def ds(pairs, side="right"):
    return SurvivalDataset.from_observations(pairs, side)


@pytest.mark.parametrize(
    "model, theta, t, expected",
    [
        ("exponential", [1.0], 1.0, -1.0),
        ("weibull", [1.0, 1.0], 1.0, -1.0),
        ("lognormal", [0.0, 1.0], 1.0, -0.5 * math.log(2 * math.pi)),
    ],
)
def test_log_density_examples(model, theta, t, expected):
    assert log_density(model, theta, t) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize(
    "model, theta, t, expected",
    [
        ("exponential", [2.0], 3.0, -6.0),
        ("weibull", [2.0, 1.0], 2.0, -4.0),
        ("lognormal", [0.0, 1.0], 1.0, math.log(0.5)),
    ],
)
def test_log_survival_examples(model, theta, t, expected):
    assert log_survival(model, theta, t) == pytest.approx(expected, abs=1e-15)


def test_log_likelihood_examples():
    assert log_likelihood("exponential", [1.0], ds([(1, 1), (2, 0)])) == pytest.approx(-3.0, abs=1e-15)
    left = ds([(0.05, 0), (0.2, 1)], "left")
    expected = math.log(1 - math.exp(-0.025)) + math.log(0.5) - 0.1
    assert log_likelihood("exponential", [0.5], left) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("model, theta", [("exponential", [0.7]), ("weibull", [1.3, 0.4]), ("lognormal", [0.2, 0.9])])
def test_single_observation_loglik_is_log_density(model, theta):
    assert log_likelihood(model, theta, ds([(1.7, 1)])) == pytest.approx(log_density(model, theta, 1.7), abs=1e-14)


@pytest.mark.parametrize("model, theta", [("exponential", [0.7]), ("weibull", [1.3, 0.4]), ("lognormal", [0.2, 0.9])])
def test_tails_agree_with_scipy(model, theta):
    # independent oracle: scipy.stats parameterizations
    t = np.geomspace(1e-3, 50, 40)
    if model == "exponential":
        ref = stats.expon(scale=1 / theta[0])
    elif model == "weibull":
        ref = stats.weibull_min(theta[0], scale=theta[1] ** (-1 / theta[0]))
    else:
        ref = stats.lognorm(theta[1], scale=math.exp(theta[0]))
    np.testing.assert_allclose(log_density(model, theta, t), ref.logpdf(t), rtol=1e-10)
    np.testing.assert_allclose(log_survival(model, theta, t), ref.logsf(t), rtol=1e-10, atol=1e-300)
    np.testing.assert_allclose(log_cdf(model, theta, t), ref.logcdf(t), rtol=1e-10, atol=1e-15)


def test_log_survival_far_tail_is_finite():
    assert log_survival("lognormal", [0.0, 1.0], 1e30) == pytest.approx(stats.norm.logsf(np.log(1e30)), rel=1e-10)
    assert log_cdf("exponential", [1.0], 1e-20) == pytest.approx(math.log(1e-20), rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(
    lam=st.floats(0.05, 20.0),
    t=st.lists(st.floats(1e-3, 30.0), min_size=1, max_size=10),
    d=st.lists(st.integers(0, 1), min_size=10, max_size=10),
    side=st.sampled_from(["right", "left"]),
)
def test_weibull_shape_one_is_exponential(lam, t, d, side):
    t = np.array(t)
    data = SurvivalDataset(t, d[: t.size], side)
    assert abs(log_density("weibull", [1.0, lam], t) - log_density("exponential", [lam], t)).max() <= 1e-12
    assert abs(log_survival("weibull", [1.0, lam], t) - log_survival("exponential", [lam], t)).max() <= 1e-12
    a = log_likelihood("weibull", [1.0, lam], data)
    b = log_likelihood("exponential", [lam], data)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(b))


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-4, 100.0), st.sampled_from(["exponential", "weibull", "lognormal"]))
def test_survival_nonincreasing_and_starts_at_one(scale, model):
    theta = {"exponential": [1 / scale], "weibull": [1.7, 1 / scale], "lognormal": [math.log(scale), 0.8]}[model]
    t = np.geomspace(1e-12 * scale, 1e3 * scale, 200)
    s = np.exp(log_survival(model, theta, t))
    assert np.all(np.diff(s) <= 0)
    assert s[0] == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("side", ["right", "left"])
@pytest.mark.parametrize("model, theta", [("exponential", [0.8]), ("weibull", [1.4, 0.6]), ("lognormal", [-0.3, 1.2])])
def test_score_matches_central_differences(model, theta, side):
    data = random_dataset(np.random.default_rng(7), 30, side)
    theta = np.array(theta)
    h = 1e-6
    num = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        num[i] = (log_likelihood(model, theta + e, data) - log_likelihood(model, theta - e, data)) / (2 * h)
    np.testing.assert_allclose(score(model, theta, data), num, rtol=1e-4)


def test_mle_examples():
    assert fit_mle("exponential", ds([(1, 1), (2, 1), (3, 1)])).estimate[0] == 0.5
    assert fit_mle("exponential", ds([(1, 1), (2, 0)])).estimate[0] == pytest.approx(1 / 3, abs=1e-16)


def test_closed_form_exact():
    rng = np.random.default_rng(3)
    for _ in range(50):
        data = random_dataset(rng, 20)
        assert fit_mle("exponential", data).estimate[0] == data.status.sum() / data.time.sum()


@pytest.mark.parametrize("side", ["right", "left"])
@pytest.mark.parametrize("model", ["exponential", "weibull", "lognormal"])
def test_mle_is_local_maximum(model, side):
    rng = np.random.default_rng(11)
    for _ in range(5):
        data = random_dataset(rng, 25, side, model)
        mle = fit_mle(model, data)
        assert mle.converged
        assert log_likelihood(model, mle.estimate, data) == pytest.approx(mle.loglik, abs=1e-12)
        u = to_unconstrained(model, mle.estimate)
        for i in range(u.size):
            for step in (-1e-3, 1e-3):
                v = u.copy()
                v[i] += step
                assert log_likelihood(model, from_unconstrained(model, v), data) <= mle.loglik + 1e-8


@pytest.mark.parametrize("side", ["right", "left"])
@pytest.mark.parametrize("model", ["weibull", "lognormal"])
def test_mle_agrees_with_independent_optimizer(model, side):
    # oracle: scipy BFGS on the scipy.stats likelihood
    data = random_dataset(np.random.default_rng(5), 40, side, model)
    t, d = data.time, data.status.astype(bool)

    def nll(u):
        a, b = (math.exp(u[0]), math.exp(u[1])) if model == "weibull" else (u[0], math.exp(u[1]))
        ref = stats.weibull_min(a, scale=b ** (-1 / a)) if model == "weibull" else stats.lognorm(b, scale=math.exp(a))
        tail = ref.logsf(t[~d]) if side == "right" else ref.logcdf(t[~d])
        return -(ref.logpdf(t[d]).sum() + tail.sum())

    res = optimize.minimize(nll, [0.0, 0.0], method="BFGS", options={"gtol": 1e-9})
    mle = fit_mle(model, data)
    assert -res.fun == pytest.approx(mle.loglik, abs=1e-7)
    np.testing.assert_allclose(to_unconstrained(model, mle.estimate), res.x, atol=2e-3)


def test_atrazine_fixture_mle(data_dir):
    from gimsurv.io import parse_dataset

    data = parse_dataset(data_dir / "atrazine.csv", "left")
    assert (data.n, data.n - data.n_events) == (24, 11)
    mle = fit_mle("lognormal", data)
    assert mle.estimate[0] == pytest.approx(-4.206, abs=0.005)
    assert mle.estimate[1] == pytest.approx(1.462, abs=0.005)


@pytest.mark.parametrize(
    "model, pairs",
    [
        ("exponential", [(1, 0), (2, 0)]),
        ("weibull", [(1, 1), (2, 0)]),
        ("lognormal", [(1, 1), (1, 1), (3, 0)]),
    ],
)
def test_degenerate_data_rejected(model, pairs):
    with pytest.raises(DegenerateDataError):
        fit_mle(model, ds(pairs))


@pytest.mark.parametrize(
    "model, theta",
    [("exponential", [0.0]), ("weibull", [1.0, -1.0]), ("lognormal", [0.0, 0.0]), ("lognormal", [1.0]), ("nope", [1.0])],
)
def test_invalid_parameters(model, theta):
    with pytest.raises(DomainError):
        log_density(model, theta, 1.0)


def test_dataset_validation():
    with pytest.raises(DataFormatError):
        SurvivalDataset([1.0, -2.0], [1, 0])
    with pytest.raises(DataFormatError):
        SurvivalDataset([1.0], [2])
    with pytest.raises(DataFormatError):
        SurvivalDataset([], [])
    with pytest.raises(DomainError):
        SurvivalDataset([1.0], [1], "middle")


def test_quantile_examples():
    assert quantile("exponential", [1.0], 0.5) == pytest.approx(math.log(2), abs=1e-15)
    assert quantile("weibull", [2.0, 1.0], 1 - math.exp(-1)) == pytest.approx(1.0, abs=1e-15)
    assert quantile("lognormal", [0.0, 1.0], 0.5) == 1.0


@pytest.mark.parametrize("model, theta", [("exponential", [2.0]), ("weibull", [0.7, 1.5]), ("lognormal", [1.0, 0.5])])
def test_sampling_distribution(model, theta):
    x = sample_event_times(model, theta, 20000, np.random.default_rng(0))
    assert np.all(x > 0)
    cdf = lambda t: -np.expm1(log_survival(model, theta, t))  # noqa: E731
    assert stats.kstest(x, cdf).statistic < 0.015


def test_family_metadata():
    assert Family("weibull").param_names == ("shape", "rate")
    assert Family.LOGNORMAL.positive == (False, True)
