import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bpspt.core import TargetModel
from bpspt.errors import DomainError, KernelError
from bpspt.kernels import (MHUniformKernel, SuwaTodoKernel, check_weights, get_kernel, mh_uniform_kernel,
                           suwa_todo_kernel, suwa_todo_row_from_logp)
from bpspt.models import NealModel, gmm24, random_mixture


class Flat(TargetModel):
    """Potential independent of y; four states."""

    dim = 1
    n_states = 5

    def potential(self, x, y=0):
        return float(x[0] ** 2)


class TestMH:
    def test_equal_energies(self):
        assert mh_uniform_kernel(Flat(), np.zeros(1), 0, 3, 1.0) == 0.25

    def test_infinite_temperature(self):
        m = random_mixture(5, 2, seed=3)
        assert mh_uniform_kernel(m, np.array([5.0, -3.0]), 0, 2, 0.0) == 0.25

    def test_neal_bit_flips_at_zero(self):
        m = NealModel()
        x = np.array([0.0, 0.3])
        for j in range(20):
            assert mh_uniform_kernel(m, x, 0, 1 << j, 1.0) == pytest.approx(1 / 20, abs=1e-15)

    def test_not_a_neighbor(self):
        with pytest.raises(DomainError):
            mh_uniform_kernel(NealModel(), np.zeros(2), 0, 3, 1.0)

    def test_vectorized_matches_scalar(self, rng):
        m = random_mixture(6, 2, seed=1)
        k = MHUniformKernel()
        for _ in range(20):
            x = rng.normal(0, 3, 2)
            y = int(rng.integers(6))
            betas = [1.0, 0.6, 0.2]
            nbrs, w = k.weights_multi(m, x, y, betas)
            for bi, b in enumerate(betas):
                for n, yn in enumerate(nbrs):
                    assert w[bi, n] == pytest.approx(mh_uniform_kernel(m, x, y, yn, b), rel=1e-12)

    def test_detailed_balance(self, rng):
        m = random_mixture(8, 3, seed=2)
        k = MHUniformKernel()
        for _ in range(50):
            x = rng.normal(0, 3, 3)
            b = rng.uniform(0.1, 1.0)
            logp = -b * m.potentials_all(x)
            for y in range(8):
                nbrs, w = k.weights(m, x, y, b)
                for yn, wn in zip(nbrs, w):
                    back = mh_uniform_kernel(m, x, yn, y, b)
                    assert wn * np.exp(logp[y] - logp.max()) == pytest.approx(back * np.exp(logp[yn] - logp.max()),
                                                                             rel=1e-10, abs=1e-300)


class TestSuwaTodo:
    def test_two_equal_states(self):
        row = suwa_todo_row_from_logp(np.zeros(2), 0)
        np.testing.assert_allclose(row, [0.0, 1.0], atol=1e-15)
        row = suwa_todo_row_from_logp(np.zeros(2), 1)
        np.testing.assert_allclose(row, [1.0, 0.0], atol=1e-15)

    def test_gmm_balance(self, rng):
        m = gmm24()
        for _ in range(20):
            x = rng.normal(1, 2, 24)
            for b in (1.0, 0.5, 0.1):
                logp = -b * m.potentials_all(x)
                pi = np.exp(logp - logp.max())
                pi /= pi.sum()
                P = np.array([suwa_todo_kernel(m, x, y, b) for y in range(4)])
                assert np.max(np.abs(pi @ P - pi)) < 1e-12

    def test_not_detailed_balance_in_general(self):
        # three distinct weights: the allocation is irreversible
        logp = np.log([0.4, 0.35, 0.25])
        P = np.array([suwa_todo_row_from_logp(logp, y) for y in range(3)])
        flows = np.exp(logp)[:, None] * P
        assert not np.allclose(flows, flows.T)

    def test_too_many_states(self):
        with pytest.raises(DomainError):
            suwa_todo_kernel(NealModel(), np.zeros(2), 0, 1.0)

    def test_tie_break_by_index(self):
        logp = np.zeros(4)
        rows = np.array([suwa_todo_row_from_logp(logp, y) for y in range(4)])
        # equal weights: each state hands its whole mass to the next one
        np.testing.assert_allclose(rows, np.roll(np.eye(4), 1, axis=1), atol=1e-15)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(2, 10).flatmap(lambda k: arrays(float, k, elements=st.floats(-30, 30))))
    def test_rows_stochastic_and_balanced(self, logp):
        k = logp.size
        P = np.array([suwa_todo_row_from_logp(logp, y) for y in range(k)])
        assert np.all(P >= 0) and np.all(P <= 1 + 1e-12)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
        w = np.exp(np.maximum(logp - logp.max(), -700.0))
        pi = w / w.sum()
        assert np.max(np.abs(pi @ P - pi)) < 1e-12

    def test_self_transition_excluded_from_weights(self, rng):
        m = random_mixture(5, 2, seed=0)
        x = rng.normal(0, 2, 2)
        nbrs, w = SuwaTodoKernel().weights(m, x, 2, 0.7)
        assert 2 not in nbrs
        assert w.sum() <= 1 + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(["mh-uniform", "suwa-todo"]), st.integers(0, 10_000), st.floats(0.01, 1.0))
def test_weights_in_unit_interval(name, seed, beta):
    m = random_mixture(6, 2, seed=seed % 7)
    x = np.random.default_rng(seed).normal(0, 4, 2)
    _, w = get_kernel(name).weights(m, x, seed % 6, beta)
    assert np.all(w >= 0) and np.all(w <= 1) and w.sum() <= 1 + 1e-12


def test_unknown_kernel():
    with pytest.raises(DomainError):
        get_kernel("gibbs")


def test_check_weights():
    with pytest.raises(KernelError):
        check_weights([0.1, -0.2])
    with pytest.raises(KernelError):
        check_weights([np.nan])
