import functools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from freqflux._moments import Moments, tree_merge
from freqflux.errors import DimensionMismatch, InputError, UnstableStep
from freqflux.netmodel import bundled_case_path, ieee14, scale_resistances
from freqflux.stochastic import (
    NoiseModel,
    Scenario,
    euler_maruyama_ou,
    load_scenario,
    monte_carlo,
    propagate_increments,
    propagation_map,
    scenario_from_dict,
    skewed_noise,
    stream,
    weibull_skewness,
)


def test_weibull_skewness_values():
    assert weibull_skewness(2.0) == pytest.approx(0.6311, abs=1e-4)
    assert weibull_skewness(1.0) == pytest.approx(2.0)
    assert abs(weibull_skewness(3.6)) < 0.01


def test_ou_stationary_variance():
    m = NoiseModel(0, lam=2.0, sigma=0.05)
    x, dx = euler_maruyama_ou(m, 0.01, 400_000, stream(1, 0, 0, 0))
    assert x.var() == pytest.approx(m.level_variance(0.01), rel=0.05)
    assert x.size == dx.size + 1
    assert np.allclose(np.diff(x), dx)


def test_ou_unstable_step():
    with pytest.raises(UnstableStep):
        euler_maruyama_ou(NoiseModel(0, lam=20.0), 0.01, 10, stream(0))


def test_weibull_marginal():
    m = NoiseModel(0, kind="ou_weibull_mapped", lam=2.0, sigma=1.0, shape=2.0, scale=0.05)
    y, _ = skewed_noise(m, 0.01, 1_000_000, stream(3, 0, 0, 0))
    assert stats.skew(y) == pytest.approx(0.631, rel=0.05)
    assert y.mean() == pytest.approx(0.05 * 0.886227, rel=0.02)
    assert y.min() >= 0


def test_mirror_flips_skew():
    m = NoiseModel(0, kind="ou_weibull_mapped", lam=2.0, sigma=1.0, mirror=True)
    y, _ = skewed_noise(m, 0.01, 300_000, stream(4, 0, 0, 0))
    assert stats.skew(y) < -0.5
    assert m.marginal_skewness() == pytest.approx(-0.631, abs=1e-3)


def test_streams_are_keyed():
    a = stream(5, 1, 2, 0).standard_normal(4)
    b = stream(5, 1, 2, 0).standard_normal(4)
    c = stream(5, 2, 1, 0).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_bad_noise_model():
    with pytest.raises(InputError):
        NoiseModel(0, target="x")
    with pytest.raises(InputError):
        NoiseModel(0, kind="levy")
    with pytest.raises(InputError):
        NoiseModel(0, lam=0.0)


def test_propagation_full_vs_simplified_lossless(net14):
    net = scale_resistances(net14, 0.0)
    full = propagation_map(net, "full", at="no_load")
    simp = propagation_map(net, "simplified")
    assert np.allclose(full.w_p, simp.w_p, rtol=1e-10, atol=1e-15)
    assert np.max(np.abs(full.w_q)) < 1e-12


def test_propagation_dimension_check(net14):
    pmap = propagation_map(net14, "simplified")
    with pytest.raises(DimensionMismatch):
        propagate_increments(pmap, np.zeros((5, 3)))
    with pytest.raises(InputError):
        propagation_map(net14, "bogus")


@functools.cache
def _full_map():
    return propagation_map(ieee14(), "full")


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**32 - 1))
def test_propagation_linear(a, b, seed):
    pmap = _full_map()
    rng = np.random.default_rng(seed)
    x1, x2, y1, y2 = rng.normal(size=(4, 50, 14))
    lhs = propagate_increments(pmap, a * x1 + b * x2, a * y1 + b * y2)
    rhs = a * propagate_increments(pmap, x1, y1) + b * propagate_increments(pmap, x2, y2)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + np.abs(rhs).max()))


def _scenario(**kw):
    doc = {
        "case": "ieee14.json",
        "noise": [{"bus": 10, "kind": "ou_gaussian", "lam": 1.0, "sigma": 0.01}, {"bus": 12, "target": "both"}],
        "dt": 0.01,
        "t_end": 5.0,
        "n_paths": 6,
        "base_seed": 11,
    }
    doc.update(kw)
    return scenario_from_dict(doc)


def test_scenario_parsing():
    sc = _scenario()
    assert isinstance(sc, Scenario)
    assert sc.n_steps == 500
    assert sc.noise[0].bus == sc.network.index(10)
    with pytest.raises(InputError):
        scenario_from_dict({"case": "ieee14.json", "noise": []})


def test_scenario_missing_case(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"case": "missing.json", "base_seed": 1}))
    with pytest.raises(InputError, match="missing.json"):
        load_scenario(p)


def test_monte_carlo_thread_independent():
    sc = _scenario()
    one = monte_carlo(sc, threads=1)
    four = monte_carlo(sc, threads=4)
    assert np.array_equal(one.d_omega, four.d_omega)
    assert one.moments_d_omega == four.moments_d_omega
    assert one.summaries == four.summaries
    assert one.d_omega.size == 6 * 500


def test_monte_carlo_path_independent_of_count():
    small = monte_carlo(_scenario(n_paths=2))
    big = monte_carlo(_scenario(n_paths=6))
    assert np.array_equal(small.d_omega, big.d_omega[: small.d_omega.size])


def test_seed_changes_output():
    a = monte_carlo(_scenario(), base_seed=1)
    b = monte_carlo(_scenario(), base_seed=2)
    assert not np.array_equal(a.d_omega, b.d_omega)


def test_bundled_scenarios_load():
    for name in ("mirrored_weibull.json", "gaussian_ou.json"):
        sc = load_scenario(bundled_case_path(name))
        assert sc.noise


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5000), st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_moments_merge_matches_direct(n, parts, seed):
    x = np.random.default_rng(seed).gamma(2.0, size=n)
    cuts = np.sort(np.random.default_rng(seed + 1).integers(0, n + 1, size=parts - 1))
    merged = tree_merge(Moments.of(c) for c in np.split(x, cuts))
    direct = Moments.of(x)
    assert merged.n == n
    assert merged.mean == pytest.approx(direct.mean, rel=1e-10, abs=1e-12)
    assert merged.m2 == pytest.approx(direct.m2, rel=1e-9, abs=1e-10)
    assert merged.m3 == pytest.approx(direct.m3, rel=1e-8, abs=1e-8)
    assert merged.m4 == pytest.approx(direct.m4, rel=1e-8, abs=1e-8)


def test_moments_match_scipy():
    x = np.random.default_rng(0).gamma(2.0, size=200_000)
    m = Moments.of(x)
    assert m.skewness == pytest.approx(stats.skew(x), rel=1e-9)
    assert m.excess_kurtosis == pytest.approx(stats.kurtosis(x), rel=1e-9)
    assert m.variance == pytest.approx(x.var(ddof=1), rel=1e-12)
