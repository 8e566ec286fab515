import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sncusum.bootstrap import AsymptoticConfig, BootstrapConfig, BootstrapDistribution, \
    critical_value, order_statistic_index, p_value, replicate_statistics, run_test, \
    wild_replicates
from sncusum.limit import simulate_quantiles


def dist_of(reps, observed=0.0, B=None):
    reps = np.sort(np.asarray(reps, dtype=float))
    return BootstrapDistribution(reps, observed, BootstrapConfig(B=B or reps.shape[0]))


class TestConfig:
    @pytest.mark.parametrize("kw", [{"B": 0}, {"alpha": 0.0}, {"alpha": 1.0},
                                    {"statistic_kind": "X"}, {"seed": -1}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            BootstrapConfig(**kw)

    def test_asymptotic_table_kind(self):
        table = simulate_quantiles("S", runs=1000, m=100, levels=(0.95,))
        AsymptoticConfig(table, "Q")
        with pytest.raises(ValueError):
            AsymptoticConfig(table, "R")


class TestReplicates:
    def test_constant_series(self):
        dist = wild_replicates([2.0] * 10, BootstrapConfig(B=50, seed=3))
        assert np.all(dist.replicates == 0.0) and dist.B == 50

    def test_sorted_and_read_only(self, rng):
        dist = wild_replicates(rng.normal(size=40), BootstrapConfig(B=300, seed=1))
        assert np.all(np.diff(dist.replicates) >= 0)
        with pytest.raises(ValueError):
            dist.replicates[0] = 1.0

    @pytest.mark.parametrize("kind", ["Q", "R"])
    def test_worker_independent(self, rng, kind):
        y = rng.normal(size=60)
        cfg = BootstrapConfig(B=8, seed=11, statistic_kind=kind)
        a = wild_replicates(y, cfg, workers=1).replicates
        b = wild_replicates(y, cfg, workers=8).replicates
        assert a.tobytes() == b.tobytes()
        big = BootstrapConfig(B=700, seed=11, statistic_kind=kind)
        assert (wild_replicates(y, big, 1).replicates.tobytes()
                == wild_replicates(y, big, 4).replicates.tobytes())

    def test_definition(self, rng):
        from sncusum.bootstrap import replicate_stream
        from sncusum.statistics import q_statistic
        y = rng.normal(size=25)
        reps = replicate_statistics(y, 5, 42, ("Q",))["Q"]
        for b in range(5):
            x = replicate_stream(42, b).standard_normal(25)
            expected = q_statistic((y - y.mean()) * x).value
            assert math.isclose(reps[b], expected, rel_tol=1e-10)

    def test_joint_kinds_share_multipliers(self, rng):
        y = rng.normal(size=30)
        both = replicate_statistics(y, 200, 5, ("Q", "R"))
        assert np.array_equal(both["Q"], replicate_statistics(y, 200, 5, ("Q",))["Q"])
        assert np.array_equal(both["R"], replicate_statistics(y, 200, 5, ("R",))["R"])

    def test_direct_and_envelope(self, rng):
        y = rng.normal(size=70)
        a = replicate_statistics(y, 300, 2, ("Q",), envelope=False)["Q"]
        b = replicate_statistics(y, 300, 2, ("Q",), envelope=True)["Q"]
        np.testing.assert_allclose(a, b, rtol=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32), st.sampled_from([-3.0, 0.1, 1e6]), st.floats(-1e3, 1e3))
    def test_scale_and_shift(self, seed, c, a):
        y = np.random.default_rng(seed).normal(size=50)
        for kind in ("Q", "R"):
            cfg = BootstrapConfig(B=64, seed=seed, statistic_kind=kind)
            base = wild_replicates(y, cfg).replicates
            np.testing.assert_allclose(wild_replicates(c * y, cfg).replicates, base, rtol=1e-9)
            np.testing.assert_allclose(wild_replicates(y + a, cfg).replicates, base, rtol=1e-9)

    @pytest.mark.slow
    def test_r_quantile_near_limit(self):
        q95 = []
        for s in range(200):
            y = np.random.default_rng(s).standard_normal(400)
            dist = wild_replicates(y, BootstrapConfig(B=2000, seed=s, statistic_kind="R"))
            q95.append(critical_value(dist, 0.05))
        assert abs(np.mean(q95) - 7.166) <= 0.6


class TestCriticalValue:
    def test_definition(self):
        assert critical_value(dist_of([1, 2, 3, 4]), 0.25) == 3.0

    def test_zeros(self):
        assert critical_value(dist_of(np.zeros(10)), 0.05) == 0.0

    def test_index_rounding(self):
        assert order_statistic_index(0.95, 2000) == 1899
        assert order_statistic_index(0.9, 10) == 8
        assert order_statistic_index(0.001, 10) == 0

    def test_invalid_alpha(self):
        with pytest.raises(ValueError):
            critical_value(dist_of([1.0, 2.0]), 1.5)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 100), min_size=1, max_size=200))
    def test_monotone_in_alpha(self, reps):
        d = dist_of(reps)
        cvs = [critical_value(d, a) for a in np.linspace(0.01, 0.99, 30)]
        assert all(x >= y for x, y in zip(cvs, cvs[1:]))


class TestPValue:
    def test_infinite_observed(self):
        assert p_value(dist_of([1.0, 2.0, 3.0], observed=math.inf)) == 0.25

    def test_infinite_replicates(self):
        d = dist_of([1.0] + [math.inf] * 3, observed=math.inf)
        assert critical_value(d, 0.5) == math.inf
        assert p_value(d) == 4 / 5

    def test_zero_observed(self):
        assert p_value(dist_of([0.0, 1.0, 2.0], observed=0.0)) == 1.0

    def test_median(self, rng):
        reps = rng.normal(size=999)
        d = dist_of(reps, observed=float(np.median(reps)))
        assert abs(p_value(d) - 0.5) <= 1 / 1000 + 1e-12

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(0, 20).map(float), min_size=5, max_size=120),
           st.integers(0, 25).map(float))
    def test_rank_consistency(self, reps, observed):
        d = dist_of(reps, observed)
        B = d.B
        for j in range(1, B + 1):
            alpha = j / (B + 1)
            assert (p_value(d) <= alpha) == (observed > critical_value(d, alpha))


class TestRunTest:
    def test_constant(self):
        rep = run_test([1.0] * 12, BootstrapConfig(B=100))
        assert rep.observed == 0.0 and not rep.reject and rep.p_value == 1.0
        assert rep.tau_hat is None and rep.degenerate

    def test_step_rejects(self):
        y = np.repeat([0.0, 1.0], 100)
        rep = run_test(y, BootstrapConfig(B=500, statistic_kind="Q"))
        assert rep.reject and rep.tau_hat == 100
        assert rep.observed == math.inf and rep.p_value == 1 / 501

    def test_reject_iff_greater(self, rng):
        for s in range(20):
            y = rng.normal(size=50) + (s % 3) * 0.4 * (np.arange(50) > 25)
            rep = run_test(y, BootstrapConfig(B=99, seed=s, statistic_kind="R"))
            assert rep.reject == (rep.observed > rep.critical_value)
            assert 0 < rep.p_value <= 1
            assert (rep.tau_hat is not None) == rep.reject

    def test_asymptotic(self, rng):
        table = simulate_quantiles("T", runs=2000, m=200, levels=(0.95,))
        y = rng.normal(size=80)
        rep = run_test(y, AsymptoticConfig(table, "R", 0.05))
        assert rep.method == "asymptotic" and rep.critical_value == table.quantile(0.95)
        assert rep.reject == (rep.observed > rep.critical_value)
        assert rep.p_value is not None

    def test_to_dict_inf(self):
        rep = run_test(np.repeat([0.0, 1.0], 5), BootstrapConfig(B=20))
        assert rep.to_dict()["observed"] == "inf"

    def test_unknown_config(self):
        with pytest.raises(TypeError):
            run_test([1.0, 2.0, 3.0], object())
