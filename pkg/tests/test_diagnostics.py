import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bpspt.diagnostics import (DiagnosticsReport, bit_marginals, cluster_probabilities, diagnose_chains, ess,
                               kld_discrete, ks_one_sample, ks_two_sample, max_ks, min_ess, mse_discrete,
                               prefix_ks_curve, ks_trend_slope)
from bpspt.errors import DataError, DomainError


def ks_brute(a, b):
    """O(mn) oracle: compare the two empirical CDFs at every observed point."""
    pts = list(a) + list(b)
    return max(abs(sum(x <= t for x in a) / len(a) - sum(y <= t for y in b) / len(b)) for t in pts)


def ar1(n, rho, rng):
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0] / math.sqrt(1 - rho * rho)
    for t in range(1, n):
        x[t] = rho * x[t - 1] + e[t]
    return x


class TestKs:
    def test_identical(self):
        assert ks_two_sample([0, 1], [0, 1]) == 0.0

    def test_disjoint(self):
        assert ks_two_sample([0], [1]) == 1.0

    def test_half(self):
        a, b = [1, 2, 3, 4], [3, 4, 5, 6]
        assert ks_two_sample(a, b) == 0.5 == ks_brute(a, b)

    def test_empty(self):
        with pytest.raises(DomainError):
            ks_two_sample([], [1.0])

    @settings(max_examples=200, deadline=None)
    @given(arrays(float, st.integers(1, 30), elements=st.integers(-5, 5).map(float)),
           arrays(float, st.integers(1, 30), elements=st.integers(-5, 5).map(float)))
    def test_matches_brute_force_with_ties(self, a, b):
        assert ks_two_sample(a, b) == pytest.approx(ks_brute(a, b), abs=1e-12)

    @settings(max_examples=100, deadline=None)
    # values on a 1/8 grid so the transforms stay strictly increasing in floating point
    @given(arrays(float, st.integers(1, 40), elements=st.integers(-80, 80).map(lambda k: k / 8)),
           arrays(float, st.integers(1, 40), elements=st.integers(-80, 80).map(lambda k: k / 8)))
    def test_symmetric_and_monotone_invariant(self, a, b):
        d = ks_two_sample(a, b)
        assert 0.0 <= d <= 1.0
        assert ks_two_sample(b, a) == d
        assert ks_two_sample(np.exp(a / 5), np.exp(b / 5)) == d
        assert ks_two_sample(np.arctan(a), np.arctan(b)) == d

    def test_one_sample_uniform(self):
        # points 1/4 and 3/4 of U(0,1): gap 1/4 at each jump
        assert ks_one_sample([0.25, 0.75], lambda x: x) == pytest.approx(0.25)


class TestEss:
    def test_iid(self):
        x = np.random.default_rng(0).standard_normal(100_000)
        assert 0.9 <= ess(x) / x.size <= 1.1

    def test_ar1(self):
        x = ar1(100_000, 0.5, np.random.default_rng(1))
        assert abs(ess(x) / x.size - 1 / 3) <= 0.2 / 3

    def test_constant(self):
        with pytest.raises(DomainError):
            ess(np.ones(50))

    def test_too_short(self):
        with pytest.raises(DomainError):
            ess(np.arange(5.0))

    def test_antithetic_clamped(self):
        x = np.tile([1.0, -1.0], 500)
        assert ess(x) == x.size

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.1, 100), st.floats(-100, 100), st.booleans())
    def test_affine_invariance(self, seed, a, b, flip):
        x = ar1(500, 0.3, np.random.default_rng(seed))
        a = -a if flip else a
        e0, e1 = ess(x), ess(a * x + b)
        assert 0 < e0 <= x.size
        assert e1 == pytest.approx(e0, rel=1e-6)


class TestKld:
    def test_exact(self):
        assert kld_discrete([0.25, 0.75], [1, 3]) == 0.0

    def test_closed_form(self):
        v = kld_discrete([0.5, 0.5], [75, 25])
        assert v == pytest.approx(0.5 * math.log(0.5 / 0.75) + 0.5 * math.log(0.5 / 0.25), rel=1e-14)
        assert v == pytest.approx(0.1438, abs=5e-5)

    def test_missing_support(self):
        assert kld_discrete([0.5, 0.5], [100, 0]) == math.inf

    def test_smoothing_keeps_finite(self):
        v = kld_discrete([0.5, 0.5], [100, 0], smoothing=1.0)
        assert math.isfinite(v) and v > 0

    @pytest.mark.parametrize("p,c", [([0.5, 0.6], [1, 1]), ([0.5, 0.5], [0, 0]), ([1.0], [1, 2]),
                                     ([0.5, 0.5], [-1, 3])])
    def test_domain(self, p, c):
        with pytest.raises(DomainError):
            kld_discrete(p, c)

    @settings(max_examples=100, deadline=None)
    @given(arrays(float, 4, elements=st.floats(0.01, 1)), arrays(np.int64, 4, elements=st.integers(1, 1000)))
    def test_nonnegative(self, w, counts):
        p = w / w.sum()
        assume(abs(p.sum() - 1) < 1e-12)
        assert kld_discrete(p, counts) >= 0.0


class TestMse:
    def test_values(self):
        assert mse_discrete([0.5, 0.5], [0.5, 0.5]) == 0.0
        assert mse_discrete([0.5, 0.5], [0.6, 0.4]) == pytest.approx(0.01, rel=1e-12)

    def test_length(self):
        with pytest.raises(DomainError):
            mse_discrete([0.5], [0.5, 0.5])

    def test_fair_coin_scale(self):
        n = 300_000
        rng = np.random.default_rng(3)
        bits = rng.integers(0, 2, size=(n, 20))
        m = mse_discrete(np.full(20, 0.5), bits.mean(axis=0))
        # expectation 0.25 / n ≈ 8.3e-7
        assert 1e-7 < m < 3e-6


class TestClusters:
    def test_single_cluster(self):
        np.testing.assert_array_equal(cluster_probabilities(np.zeros(10, int), 4), [1, 0, 0, 0])

    def test_uniform(self):
        n = 40_000
        y = np.random.default_rng(4).integers(0, 4, n)
        p = cluster_probabilities(y, 4)
        assert np.all(np.abs(p - 0.25) < 3 * math.sqrt(0.25 * 0.75 / n))

    def test_labels_checked(self):
        with pytest.raises(DataError):
            cluster_probabilities([0, 5], 4)
        with pytest.raises(DomainError):
            cluster_probabilities([], 4)

    def test_bit_marginals(self):
        np.testing.assert_array_equal(bit_marginals([0b01, 0b11, 0b10, 0b00], 2), [0.5, 0.5])


class TestReductions:
    def test_max_and_min(self, rng):
        x = rng.standard_normal((500, 3))
        x[:, 2] += 1.0
        ref = rng.standard_normal((500, 3))
        m, per = max_ks(x, ref)
        assert m == per.max() and np.argmax(per) == 2
        e, pe = min_ess(x)
        assert e == pe.min()

    def test_shape_mismatch(self, rng):
        with pytest.raises(DataError):
            max_ks(rng.standard_normal((5, 2)), rng.standard_normal((5, 3)))

    def test_prefix_curve_decreases_for_exact_draws(self, rng):
        ref = rng.standard_normal((5000, 2))
        x = rng.standard_normal((5000, 2))
        ns, vals = prefix_ks_curve(x, ref)
        assert ns[0] == 10 and ns[-1] == 5000 and np.all(np.diff(ns) > 0)
        assert ks_trend_slope(ns, vals) < 0

    def test_report(self, rng, tmp_path):
        truth = np.array([0.25, 0.75])
        ys = [rng.choice(2, 200, p=truth) for _ in range(2)]
        xs = [rng.standard_normal((200, 2)) for _ in range(2)]
        rep = diagnose_chains(xs, ys, rng.standard_normal((200, 2)), truth=truth, metric="kld")
        assert isinstance(rep, DiagnosticsReport)
        assert rep.n_chains == 2 and rep.n_samples == 200
        assert 0 <= rep.max_ks <= 1 and 0 < rep.min_ess <= 200 and rep.kld >= 0
        assert '"max_ks"' in rep.to_json(tmp_path / "r.json")
        lines = rep.to_csv(tmp_path / "r.csv").read_text().splitlines()
        assert lines[0] == "component,ks,ess" and len(lines) == 3

    def test_report_mse(self, rng):
        truth = np.full(3, 0.5)
        ys = [rng.integers(0, 8, 300)]
        rep = diagnose_chains([rng.standard_normal((300, 1))], ys, rng.standard_normal((300, 1)), truth=truth,
                              metric="mse")
        assert rep.mse is not None and rep.kld is None and len(rep.discrete_estimate) == 3

    def test_no_chains(self):
        with pytest.raises(DataError):
            diagnose_chains([], [], np.zeros((5, 1)))
