import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from bpspt.core import make_rng
from bpspt.diagnostics import ks_two_sample
from bpspt.errors import DomainError, DominanceError
from bpspt.events import (AffineEnvelope, clipped_sum_rate, invert_affine_envelope, invert_clipped_sum,
                          thin_next_event, validate_envelope)

E1 = math.exp(-1.0)


class TestInvertAffine:
    def test_constant(self):
        d = invert_affine_envelope(AffineEnvelope(1.0, 0.0, 10.0), E1)
        assert d.arrived and d.dt == pytest.approx(1.0, abs=1e-12)

    def test_ramp(self):
        d = invert_affine_envelope(AffineEnvelope(0.0, 2.0, 10.0), E1)
        assert d.dt == pytest.approx(1.0, abs=1e-12)

    def test_clipped_start(self):
        d = invert_affine_envelope(AffineEnvelope(-1.0, 1.0, 10.0), E1)
        assert d.dt == pytest.approx(1.0 + math.sqrt(2.0), abs=1e-12)
        # quadrature oracle of the clipped rate
        val, _ = integrate.quad(lambda t: max(0.0, -1.0 + t), 0.0, d.dt, points=[1.0])
        assert val == pytest.approx(1.0, abs=1e-10)

    def test_horizon_exhausted(self):
        d = invert_affine_envelope(AffineEnvelope(0.1, 0.0, 1.0), E1)
        assert not d.arrived and d.dt == 1.0

    def test_decreasing_to_zero_never_arrives(self):
        # total mass 0.5 < 1
        assert not invert_affine_envelope(AffineEnvelope(1.0, -1.0, 10.0), E1).arrived

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.5, 2.0])
    def test_domain(self, u):
        with pytest.raises(DomainError):
            invert_affine_envelope(AffineEnvelope(1.0, 0.0, 1.0), u)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    def test_monotone_in_u(self, a, b, u1, u2):
        env = AffineEnvelope(a, b, 50.0)
        lo, hi = sorted((u1, u2))
        d_lo = invert_affine_envelope(env, lo)
        d_hi = invert_affine_envelope(env, hi)
        t_lo = d_lo.dt if d_lo.arrived else math.inf
        t_hi = d_hi.dt if d_hi.arrived else math.inf
        assert t_hi <= t_lo

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=4),
           st.floats(0, 3), st.floats(0.01, 5.0))
    def test_integral_matches_target(self, ab, c, target):
        a = [p[0] for p in ab]
        b = [p[1] for p in ab]
        dt = invert_clipped_sum(a, b, c, 20.0, target)
        f = lambda t: clipped_sum_rate(a, b, c, t)
        # kinks of the clipped terms, so quad does not smear them
        kinks = [-ai / bi for ai, bi in zip(a, b) if bi != 0.0]
        end = 20.0 if dt is None else dt
        pts = [k for k in kinks if 0.0 < k < end] or None
        if dt is None:
            total, _ = integrate.quad(f, 0, 20.0, points=pts, limit=200)
            assert total <= target + 1e-6
        else:
            val, _ = integrate.quad(f, 0, dt, points=pts, limit=200)
            assert val == pytest.approx(target, rel=1e-6, abs=1e-8)


class TestThinning:
    def test_tight_constant_is_exponential(self):
        rng = make_rng(0)
        res = [thin_next_event(lambda t: 2.0, lambda s, h: AffineEnvelope(2.0, 0.0, h), 100.0, rng)
               for _ in range(5000)]
        assert all(r.accepted and r.rejections == 0 for r in res)
        dts = np.array([r.dt for r in res])
        ref = make_rng(1).standard_exponential(5000) / 2.0
        assert ks_two_sample(dts, ref) < 0.04

    def test_zero_rate_never_fires(self):
        r = thin_next_event(lambda t: 0.0, lambda s, h: AffineEnvelope(1.0, 0.0, h), 5.0, make_rng(0))
        assert not r.accepted and r.dt == 5.0 and r.rejections == r.proposals > 0

    def test_dominance_violation_detected(self):
        with pytest.raises(DominanceError):
            thin_next_event(lambda t: 5.0, lambda s, h: AffineEnvelope(1.0, 0.0, h), 100.0, make_rng(0),
                            validate=True)

    def test_renewal_split_preserves_law(self):
        rate = lambda t: 0.5 + 0.5 * math.sin(t) ** 2
        whole = lambda s, h: AffineEnvelope(1.0, 0.0, h)
        split = lambda s, h: AffineEnvelope(1.0, 0.0, min(h, 0.5))
        r1, r2 = make_rng(3), make_rng(4)
        a = [thin_next_event(rate, whole, 10.0, r1).dt for _ in range(10_000)]
        b = [thin_next_event(rate, split, 10.0, r2).dt for _ in range(10_000)]
        assert ks_two_sample(a, b) < 0.02

    def test_competition_split_frequencies(self):
        # two constant streams through one thinning loop plus a categorical split
        rng = make_rng(5)
        l1, l2 = 0.3, 0.9
        hits = 0
        n = 100_000
        for _ in range(n):
            r = thin_next_event(lambda t: l1 + l2, lambda s, h: AffineEnvelope(1.5, 0.0, h), 1e9, rng)
            assert r.accepted
            hits += rng.random() * (l1 + l2) < l1
        assert abs(hits / n - l1 / (l1 + l2)) < 0.01


class TestValidateEnvelope:
    def test_equality(self):
        assert validate_envelope(lambda t: t, AffineEnvelope(0.0, 1.0, 1.0), 100)

    def test_violation(self):
        assert not validate_envelope(lambda t: t * t, AffineEnvelope(0.0, 1.0, 2.0), 100)

    def test_grid_points(self):
        with pytest.raises(DomainError):
            validate_envelope(lambda t: 0.0, AffineEnvelope(1.0, 0.0, 1.0), 1)
