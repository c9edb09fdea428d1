import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gimsurv import Atom, StepDistribution, SurvivalDataset, kaplan_meier, reversed_kaplan_meier
from gimsurv.km import sample


def ds(pairs, side="right"):
    return SurvivalDataset.from_observations(pairs, side)


def brute_force_km(times, events):
    """Product-limit survival at each distinct time, by explicit counting."""
    out = {}
    s = 1.0
    for u in sorted(set(times)):
        deaths = sum(1 for t, e in zip(times, events) if t == u and e)
        at_risk = sum(1 for t in times if t >= u)
        if deaths:
            s = s * (1.0 - deaths / at_risk)
            out[u] = s
    return out


def brute_force_left(times, events):
    """Distribution function of left-censored data by a backward product over exact values."""
    cdf = {}
    f = 1.0
    for u in sorted(set(times), reverse=True):
        deaths = sum(1 for t, e in zip(times, events) if t == u and e)
        at_risk = sum(1 for t in times if t <= u)
        if deaths:
            cdf[u] = f
            f = f * (1.0 - deaths / at_risk)
    return cdf, f


def random_small(rng):
    n = int(rng.integers(1, 13))
    t = rng.integers(1, 6, n).astype(float)
    d = rng.integers(0, 2, n)
    return t, d


def test_examples():
    km = kaplan_meier(ds([(1, 1), (2, 0), (3, 1)]))
    assert km.jump_points.tolist() == [1.0, 3.0]
    assert km.survival_values.tolist() == pytest.approx([2 / 3, 0.0], abs=1e-15)
    assert km.atom_location is Atom.NONE

    km = kaplan_meier(ds([(1, 0)]))
    assert km.jump_points.size == 0 and km.atom_mass == 1.0 and km.atom_location is Atom.INFINITY
    assert km.survival(123.0) == 1.0

    km = kaplan_meier(ds([(1, 1), (1, 1)]))
    assert km.survival([0.5, 1.0, 7.0]).tolist() == [1.0, 0.0, 0.0]


def test_reversed_examples():
    g = reversed_kaplan_meier(ds([(1, 1), (2, 0), (3, 1)]))
    assert g.jump_points.tolist() == [2.0]
    assert g.survival_values.tolist() == [0.5]
    assert (g.atom_location, g.atom_mass) == (Atom.INFINITY, 0.5)

    g = reversed_kaplan_meier(ds([(3, 0), (1, 0), (2, 0)]))
    assert g.survival([1, 2, 3]).tolist() == pytest.approx([2 / 3, 1 / 3, 0.0], abs=1e-15)

    g = reversed_kaplan_meier(ds([(1, 1), (2, 1)]))
    assert g.atom_mass == 1.0 and g.atom_location is Atom.INFINITY
    assert np.all(np.isinf(g.sample(50, np.random.default_rng(0))))


def test_matches_brute_force_oracle_exactly():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        t, d = random_small(rng)
        km = kaplan_meier(SurvivalDataset(t, d))
        ref = brute_force_km(t.tolist(), d.tolist())
        assert km.jump_points.tolist() == list(ref)
        assert km.survival_values.tolist() == list(ref.values())
        tail = list(ref.values())[-1] if ref else 1.0
        if tail > 0:
            assert km.atom_location is Atom.INFINITY and km.atom_mass == tail
        else:
            assert km.atom_location is Atom.NONE


def test_reversed_is_km_of_flipped_labels_exactly():
    rng = np.random.default_rng(99)
    for _ in range(1000):
        t, d = random_small(rng)
        for side in ("right", "left"):
            data = SurvivalDataset(t, d, side)
            assert reversed_kaplan_meier(data) == kaplan_meier(SurvivalDataset(t, 1 - d, side))


def test_left_censored_against_backward_oracle():
    rng = np.random.default_rng(5)
    for _ in range(500):
        t, d = random_small(rng)
        km = kaplan_meier(SurvivalDataset(t, d, "left"))
        cdf, at_zero = brute_force_left(t.tolist(), d.tolist())
        assert km.jump_points.tolist() == sorted(cdf)
        for u, f in cdf.items():
            assert km.cdf(u) == pytest.approx(f, abs=1e-12)
        if at_zero > 0:
            assert km.atom_location is Atom.ZERO
            assert km.atom_mass == pytest.approx(at_zero, abs=1e-12)
            assert km.cdf(0.0) == pytest.approx(at_zero, abs=1e-12)
        else:
            assert km.atom_location is Atom.NONE


def test_left_censoring_atom_at_zero():
    # smallest observation censored below a detection limit: mass stays at 0
    g = kaplan_meier(ds([(0.5, 0), (1, 1), (2, 1)], "left"))
    assert g.atom_location is Atom.ZERO
    assert g.atom_mass == pytest.approx(1 / 3)
    assert g.quantile([0.2]).tolist() == [0.0]


def test_uncensored_is_empirical_survival():
    t = np.array([3.0, 1.0, 2.0, 2.0, 5.0])
    km = kaplan_meier(SurvivalDataset(t, np.ones(5, int)))
    grid = np.linspace(0, 6, 121)
    np.testing.assert_array_equal(km.survival(grid), [(t > g).mean() for g in grid])


def test_sampling_examples():
    point = StepDistribution([5.0], [0.0])
    assert point.quantile(0.3) == 5.0
    emp = StepDistribution([1.0, 2.0, 3.0], [2 / 3, 1 / 3, 0.0])
    assert emp.quantile([0.34, 0.5, 2 / 3]).tolist() == [2.0, 2.0, 2.0]
    assert emp.quantile([1 / 3]).tolist() == [1.0]
    with pytest.raises(ValueError):
        sample(emp, 0, np.random.default_rng(0))


@pytest.mark.parametrize("side", ["right", "left"])
def test_sampling_matches_step_cdf(side):
    rng = np.random.default_rng(31)
    t = rng.integers(1, 30, 25).astype(float)
    d = rng.integers(0, 2, 25)
    d[np.argmax(t)] = 0 if side == "right" else 1
    d[np.argmin(t)] = 1 if side == "right" else 0
    dist = kaplan_meier(SurvivalDataset(t, d, side))
    assert dist.atom_mass > 0
    draws = sample(dist, 100_000, np.random.default_rng(1))
    if side == "right":
        atom = np.isinf(draws)
    else:
        atom = draws == 0.0
    assert abs(atom.mean() - dist.atom_mass) < 0.01
    finite = draws[~atom & np.isfinite(draws)]
    grid = np.unique(np.concatenate((dist.jump_points, dist.jump_points - 0.5)))
    target = dist.cdf(grid)
    if side == "left":
        target = target - dist.atom_mass
    empirical = np.searchsorted(np.sort(finite), grid, side="right") / draws.size
    assert np.max(np.abs(empirical - target)) < 0.01


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.tuples(st.integers(1, 8), st.integers(0, 1)), min_size=1, max_size=15),
    st.sampled_from(["right", "left"]),
)
def test_step_distribution_is_monotone_and_right_continuous(pairs, side):
    dist = kaplan_meier(ds([(float(t), d) for t, d in pairs], side))
    grid = np.linspace(0, 9, 901)
    s = dist.survival(grid)
    assert np.all(np.diff(s) <= 1e-15)
    assert np.all((s >= 0) & (s <= 1))
    for k, p in enumerate(dist.jump_points):
        assert dist.survival(p) == dist.survival_values[k]
        assert dist.survival(p + 1e-9) == dist.survival_values[k]
    assert np.isclose(dist.point_masses.sum() + dist.atom_mass, 1.0)


def test_round_trip_dict():
    g = reversed_kaplan_meier(ds([(1, 1), (2, 0), (3, 1)]))
    assert StepDistribution.from_dict(g.to_dict()) == g


def test_invariants_enforced():
    with pytest.raises(ValueError):
        StepDistribution([2.0, 1.0], [0.5, 0.0])
    with pytest.raises(ValueError):
        StepDistribution([1.0], [0.5])
    with pytest.raises(ValueError):
        StepDistribution([1.0], [0.5], 0.4, Atom.INFINITY)
