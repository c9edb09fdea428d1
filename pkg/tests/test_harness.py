import json
import math

import numpy as np
import pytest

from gimsurv import SurvivalDataset, fit_mle
from gimsurv.harness import (
    PRESETS,
    ExperimentDesign,
    NoCensoring,
    UniformCensoring,
    generate_censored_sample,
    observed_information,
    preset,
    run_coverage,
    run_validity,
    wald_interval,
)
from gimsurv.engine import MonteCarloConfig, stream


def design(**kw):
    base = dict(model="exponential", true_theta=(1.0,), censoring=UniformCensoring(0.0, 5.0), n=15,
                replications=100, mc=MonteCarloConfig(M=100, seed=1))
    base.update(kw)
    return ExperimentDesign(**base)


def test_censoring_probability_closed_form():
    # (1 - e^-5) / 5, the integral of e^-c / 5 over (0, 5)
    assert UniformCensoring(0, 5).censoring_probability("exponential", [1.0]) == pytest.approx(0.19865241, abs=1e-8)
    assert UniformCensoring(0, 5).censoring_probability("weibull", [1.0, 1.0]) == pytest.approx(0.19865241, abs=1e-8)


def test_generate_sample_censoring():
    rng = stream(5, 0, 0)
    data = generate_censored_sample(design(censoring=NoCensoring()), rng)
    assert data.n_events == data.n
    tiny = design(censoring=UniformCensoring(0.0, 1e-9), n=200)
    assert generate_censored_sample(tiny, stream(5, 0, 1)).censored_fraction > 0.99
    left = design(model="lognormal", true_theta=(0.0, 1.0), censoring=UniformCensoring(0.0, 1.0, "left"), n=500)
    data = generate_censored_sample(left, stream(5, 0, 2))
    assert data.side.value == "left"
    expected = UniformCensoring(0.0, 1.0, "left").censoring_probability("lognormal", [0.0, 1.0])
    assert data.censored_fraction == pytest.approx(expected, abs=0.06)


def test_wald_uncensored_exponential():
    # I(theta_hat) = n / theta_hat^2, so the interval is theta_hat (1 +/- 1.96 / sqrt(n))
    t = np.array([0.3, 1.2, 0.8, 2.5, 0.1, 0.9, 1.7, 0.4])
    data = SurvivalDataset(t, np.ones(t.size, int))
    mle = fit_mle("exponential", data)
    est, n = mle.estimate[0], t.size
    assert observed_information("exponential", data, mle.estimate)[0, 0] == pytest.approx(n / est**2, rel=1e-6)
    w = wald_interval("exponential", data, 0.05)
    z = 1.959963984540054
    assert (w.lower, w.upper) == pytest.approx((est * (1 - z / math.sqrt(n)), est * (1 + z / math.sqrt(n))), rel=1e-6)


def test_wald_two_parameter_and_functional():
    rng = np.random.default_rng(3)
    x = rng.lognormal(0.0, 1.0, 40)
    data = SurvivalDataset(x, np.ones(40, int))
    w = wald_interval("lognormal", data)
    assert w.available and w.contains(w.estimate) and not w.contains(w.estimate + 10)
    # uncensored log-normal: I = diag(n / s^2, 2n / s^2) with s the ddof=0 sd of log x
    s = np.log(x).std()
    np.testing.assert_allclose(w.covariance, np.diag([s**2 / 40, s**2 / 80]), rtol=1e-4, atol=1e-7)
    psi = wald_interval("lognormal", data, psi=lambda th: math.exp(th[0] + th[1] ** 2 / 2))
    assert psi.lower < math.exp(w.estimate[0] + w.estimate[1] ** 2 / 2) < psi.upper


def test_wald_unavailable_for_degenerate():
    data = SurvivalDataset([1.0, 2.0], [0, 0])
    assert not wald_interval("exponential", data).available


def test_coverage_grows_as_alpha_shrinks():
    small = run_coverage(design(alpha=0.001, replications=200))
    assert small.coverage >= 0.99
    assert small.coverage == sum(r["covered"] for r in small.records) / small.replications


def test_known_g_validity_small():
    report = run_validity(design(kind="validity", replications=300, mc=MonteCarloConfig(M=200, seed=4)),
                          use_plugin=False)
    se = lambda a: math.sqrt(a * (1 - a) / 300)  # noqa: E731
    for a, p in zip(report.validity_curve["alpha"], report.validity_curve["prob_le_alpha"]):
        assert p <= a + 3 * se(a) + 1 / 201


def test_single_draw_calibration_is_degenerate():
    report = run_validity(design(kind="validity", replications=200, mc=MonteCarloConfig(M=1, seed=4)))
    pvals = np.array([r["plausibility"] for r in report.records if not r["dropped"]])
    assert set(np.unique(pvals)) <= {0.0, 1.0}
    assert report.ks_distance > 0.3


def test_replications_independent_of_workers():
    a = run_coverage(design(replications=24, mc=MonteCarloConfig(M=50, seed=2, parallel_workers=1)))
    b = run_coverage(design(replications=24, mc=MonteCarloConfig(M=50, seed=2, parallel_workers=3)))
    assert [r["plausibility"] for r in a.records] == [r["plausibility"] for r in b.records]


def test_weibull_joint_and_lognormal_marginal_run():
    w = run_coverage(preset("weibull-coverage-n25", seed=1, replications=10, M=60))
    assert w.replications + w.dropped == 10
    ln = run_coverage(preset("lognormal-coverage-n25", seed=1, replications=4, M=30, marginal_grid_size=11))
    assert all("target" in r for r in ln.records if not r["dropped"])
    assert math.isfinite(ln.mean_region_size)


def test_degenerate_replications_dropped():
    report = run_coverage(design(censoring=UniformCensoring(0.0, 0.02), n=3, replications=50))
    assert report.dropped > 0
    assert report.replications + report.dropped == 50


def test_design_round_trip_and_presets():
    d = preset("exp-validity-n15", seed=7)
    assert (d.replications, d.mc.M, d.n, d.kind) == (1000, 300, 15, "validity")
    assert ExperimentDesign.from_dict(json.loads(json.dumps(d.to_dict()))) == d
    big = preset("exp-coverage-n50", seed=7, full_scale=True)
    assert (big.replications, big.mc.M) == (10_000, 500)
    assert {"exp-validity-n15", "weibull-coverage-n25", "lognormal-coverage-n15"} <= set(PRESETS)
    with pytest.raises(KeyError):
        preset("nope")
    with pytest.raises(ValueError):
        design(n=1)
    with pytest.raises(ValueError):
        design(replications=0)


def test_report_serialization():
    report = run_coverage(design(replications=20))
    payload = report.to_dict()
    json.dumps(payload, allow_nan=False)
    assert len(payload["records"]) == 20
    lines = report.records_csv().splitlines()
    assert lines[0].startswith("replication,") and len(lines) == 21
