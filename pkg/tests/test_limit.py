import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sncusum.limit import QuantileTable, VarianceProfile, bridge_sup, eta_from_sigma, \
    functional_S, functional_T, functional_T_quadrature, simulate_alternative_limit, \
    simulate_functionals, simulate_path, simulate_quantiles, zeta_bridge


class TestVarianceProfile:
    def test_constant(self):
        eta = eta_from_sigma(VarianceProfile.constant())
        t = np.linspace(0, 1, 11)
        np.testing.assert_allclose(eta(t), t)

    def test_first_quarter_times_ten(self):
        eta = eta_from_sigma(VarianceProfile.piecewise_constant((0, 0.25, 1), (100, 1)))
        t = np.array([0.0, 0.1, 0.2, 0.25, 0.5, 0.9, 1.0])
        expected = np.where(t < 0.25, 400 * t / 103, 100 / 103 + (4 * t - 1) / 103)
        np.testing.assert_allclose(eta(t), expected, rtol=1e-13)

    def test_forty_over_thirteen(self):
        # sigma^2 = 10 on the first quarter gives the 40t/13 time change
        eta = eta_from_sigma(VarianceProfile.piecewise_constant((0, 0.25, 1), (10, 1)))
        t = np.array([0.05, 0.2, 0.3, 0.8])
        expected = np.where(t < 0.25, 40 * t / 13, 10 / 13 + (4 * t - 1) / 13)
        np.testing.assert_allclose(eta(t), expected, rtol=1e-13)

    def test_linear_doubling(self):
        eta = eta_from_sigma(VarianceProfile.piecewise_linear((0, 1), (1, 2)))
        t = np.linspace(0, 1, 21)
        np.testing.assert_allclose(eta(t), (t + t ** 2 / 2) / 1.5, rtol=1e-13)

    @pytest.mark.parametrize("kind, breaks, values", [
        ("piecewise_constant", (0, 0.5, 1), (1, 0)),
        ("piecewise_constant", (0, 0.5, 1), (1,)),
        ("piecewise_linear", (0, 1), (1, -1)),
        ("piecewise_constant", (0.1, 1), (1,)),
        ("bogus", (0, 1), (1,)),
    ])
    def test_invalid(self, kind, breaks, values):
        with pytest.raises(ValueError):
            VarianceProfile(kind, breaks, values)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0.01, 100), min_size=2, max_size=6), st.booleans())
    def test_eta_properties(self, vals, linear):
        k = len(vals)
        breaks = np.linspace(0, 1, k if linear else k + 1)
        prof = (VarianceProfile.piecewise_linear(breaks, vals) if linear
                else VarianceProfile.piecewise_constant(breaks, vals))
        t = np.linspace(0, 1, 101)
        e = prof.eta(t)
        assert e[0] == 0.0 and math.isclose(e[-1], 1.0)
        assert np.all(np.diff(e) >= -1e-15)

    def test_round_trip(self):
        p = VarianceProfile.piecewise_linear((0, 0.3, 1), (1, 3, 2))
        assert VarianceProfile.from_dict(json.loads(json.dumps(p.to_dict()))) == p
        assert VarianceProfile.from_dict({"kind": "constant"}).id == "linear"


class TestPaths:
    def test_starts_at_zero(self, rng):
        assert simulate_path(lambda t: t, 50, rng)[0] == 0.0

    def test_flat_eta_gives_zero_increments(self, rng):
        eta = lambda t: np.minimum(t, 0.5) / 0.5  # noqa: E731
        path = simulate_path(eta, 100, rng)
        assert np.all(np.diff(path)[50:] == 0.0)

    def test_small_m(self, rng):
        with pytest.raises(ValueError):
            simulate_path(lambda t: t, 1, rng)

    def test_terminal_variance(self):
        rng = np.random.default_rng(3)
        ends = np.array([simulate_path(lambda t: t, 20, rng)[-1] for _ in range(100_000)])
        assert abs(ends.var() - 1.0) <= 0.02


class TestFunctionals:
    @pytest.mark.parametrize("fn", [functional_S, functional_T, functional_T_quadrature])
    def test_linear_path(self, fn):
        assert fn(np.arange(101) / 100) == 0.0

    @pytest.mark.parametrize("fn", [functional_S, functional_T, functional_T_quadrature])
    def test_zero_path(self, fn):
        assert fn(np.zeros(51)) == 0.0

    def test_quadrature_oracle(self, rng):
        for m in (10, 137, 500):
            path = simulate_path(lambda t: t, m, rng)
            assert math.isclose(functional_T(path), functional_T_quadrature(path), rel_tol=1e-8)

    def test_s_definition(self, rng):
        m = 40
        w = simulate_path(lambda t: t, m, rng)
        best = 0.0
        for k in range(1, m + 1):
            head = max(abs(w[j] - j / k * w[k]) for j in range(0, k + 1))
            wt = w[m] - w
            tail = max((abs(wt[j] - (m - j) / (m - k) * wt[k]) for j in range(k, m + 1)),
                       default=0.0) if k < m else 0.0
            best = max(best, abs(w[k] - k / m * w[m]) / (head + tail))
        assert math.isclose(functional_S(w), best, rel_tol=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 31), st.sampled_from([-3.0, 0.1, 1e6]))
    def test_scale_invariance(self, seed, c):
        w = simulate_path(lambda t: t, 200, np.random.default_rng(seed))
        assert math.isclose(functional_S(c * w), functional_S(w), rel_tol=1e-9)
        assert math.isclose(functional_T(c * w), functional_T(w), rel_tol=1e-9)

    def test_bridge_sup(self):
        w = np.array([0.0, 1.0, -1.0, 2.0])
        # bridge values 0, 1/3, -7/3, 0
        assert math.isclose(bridge_sup(w), 7 / 3)


class TestZetaBridge:
    def test_continuity(self, rng):
        B = np.concatenate(([0.0], np.cumsum(rng.normal(size=1000)) / math.sqrt(1000)))
        for zeta in (0.1, 0.5, 0.731):
            bz = zeta_bridge(B, zeta)
            j = int(round(zeta * 1000))
            z = j / 1000
            assert abs(bz[j] - (1 - z) * B[j]) <= 1e-12
            assert abs((B[j] - z * B[j]) - (1 - z) * B[j]) <= 1e-12

    @pytest.mark.parametrize("zeta", [0.0, 1.0, -0.5])
    def test_zeta_range(self, zeta):
        with pytest.raises(ValueError):
            zeta_bridge(np.zeros(11), zeta)


class TestSimulation:
    def test_worker_independent(self):
        a = simulate_functionals(("S", "T"), m=100, runs=3000, seed=4, workers=1)
        b = simulate_functionals(("S", "T"), m=100, runs=3000, seed=4, workers=3)
        for k in "ST":
            assert a[k].tobytes() == b[k].tobytes()

    def test_table(self):
        t = simulate_quantiles("S", m=200, runs=5000, seed=1)
        assert t.monotone and len(t.mc_stderr) == len(t.levels)
        assert all(e > 0 for e in t.mc_stderr)
        assert t.quantile(0.95) == t.quantiles[1]
        assert t.quantile(0.5) <= t.quantile(0.9)
        assert t.p_value(math.inf) == 1 / 5001

    def test_size_guards(self):
        with pytest.raises(ValueError):
            simulate_quantiles("S", m=50, runs=1000)
        with pytest.raises(ValueError):
            simulate_quantiles("S", m=100, runs=999)
        with pytest.raises(ValueError):
            simulate_quantiles("X", m=100, runs=1000)

    def test_serialisation(self):
        t = simulate_quantiles("T", m=100, runs=1000, seed=2, levels=(0.9, 0.95))
        back = QuantileTable.from_dict(json.loads(t.to_json()))
        assert back == t
        lines = t.to_csv().splitlines()
        assert lines[0] == "level,quantile,mc_stderr" and len(lines) == 3

    def test_brownian_bridge_matches_kolmogorov(self):
        t = simulate_quantiles("BB", m=1000, runs=20000, levels=(0.9, 0.95, 0.99), seed=0)
        for lv, q in zip(t.levels, t.quantiles):
            # the grid maximum sits slightly below the continuous supremum
            assert abs(q - stats.kstwobign.ppf(lv)) <= 0.04

    def test_alternative_zero_delta(self):
        runs = 10_000
        null = simulate_functionals(("S",), m=200, runs=runs, seed=10)["S"]
        alt = simulate_alternative_limit("S", delta=0.0, zeta=0.3, m=200, runs=runs, seed=11)
        assert stats.ks_2samp(null, alt.sample).pvalue > 0.01

    def test_alternative_zero_delta_same_stream(self):
        a = simulate_functionals(("T",), m=100, runs=1000, seed=5)["T"]
        b = simulate_functionals(("T",), m=100, runs=1000, seed=5, alt=(0.0, 0.5))["T"]
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_alternative_guards(self):
        with pytest.raises(ValueError):
            simulate_alternative_limit("BB", m=100, runs=1000)
        with pytest.raises(ValueError):
            simulate_alternative_limit("S", delta=math.inf, m=100, runs=1000)
        with pytest.raises(ValueError):
            simulate_alternative_limit("S", delta=1.0, zeta=1.0, m=100, runs=1000)

    def test_discretisation_stability(self):
        a = simulate_quantiles("S", m=500, runs=20000, seed=7, levels=(0.95,))
        b = simulate_quantiles("S", m=1000, runs=20000, seed=7, levels=(0.95,))
        se = math.hypot(a.mc_stderr[0], b.mc_stderr[0])
        assert abs(a.quantiles[0] - b.quantiles[0]) < 3 * se

    @pytest.mark.slow
    @pytest.mark.parametrize("kind, level, target, tol", [
        ("S", 0.90, 1.209008, 0.02), ("S", 0.95, 1.393566, 0.02),
        ("S", 0.99, 1.782524, 0.04), ("T", 0.95, 7.165705, 0.15),
    ])
    def test_reference_quantiles(self, kind, level, target, tol):
        t = _full_table(kind)
        assert abs(t.quantile(level) - target) <= tol


_CACHE = {}


def _full_table(kind):
    if kind not in _CACHE:
        _CACHE[kind] = simulate_quantiles(kind, m=1000, runs=100_000, seed=0)
    return _CACHE[kind]
