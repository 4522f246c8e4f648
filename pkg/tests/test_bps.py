import math

import numpy as np
import pytest
from scipy import stats

from bpspt.bps import BpsConfig, SampleTrace, run_bps_continuous, run_bps_mixed, write_summary
from bpspt.core import MixedState, RateParams, make_rng
from bpspt.diagnostics import ks_one_sample
from bpspt.errors import ConfigError, DataError, DomainError
from bpspt.kernels import MHUniformKernel, SuwaTodoKernel
from bpspt.models import GaussianMixtureModel, IsotropicGaussian, gmm24

from conftest import BACKENDS


def lag1(x):
    x = x - x.mean()
    return float(np.dot(x[:-1], x[1:]) / np.dot(x, x))


@pytest.mark.parametrize("backend", BACKENDS)
def test_gaussian_equilibrium(backend):
    n = 50_000 if backend == "compiled" else 10_000
    tr = run_bps_continuous(IsotropicGaussian(1), BpsConfig(1.0, n, RateParams(1, 0, 1), seed=3), backend=backend)
    tol = 0.02 if backend == "compiled" else 0.04
    assert ks_one_sample(tr.x[:, 0], stats.norm.cdf) < tol


def test_stationary_start_stays_stationary():
    # exact initial draw, one short step per chain
    ends = []
    for seed in range(200):
        rng = make_rng(100 + seed)
        init = MixedState(rng.standard_normal(1), rng.standard_normal(1))
        tr = run_bps_continuous(IsotropicGaussian(1), BpsConfig(0.5, 1, RateParams(), seed=seed), initial=init)
        ends.append(tr.x[0, 0])
    # 200 independent one-step draws remain standard normal
    assert ks_one_sample(np.array(ends), stats.norm.cdf) < 1.63 / math.sqrt(200)


def test_sample_times_exact():
    tr = run_bps_continuous(IsotropicGaussian(2), BpsConfig(0.3, 100, seed=1))
    np.testing.assert_array_equal(tr.times, 0.3 * np.arange(1, 101))
    assert len(tr) == 100


def test_speed_constant_without_refresh():
    init = MixedState(np.array([1.0, -2.0, 0.5]), np.array([0.3, 1.2, -0.7]))
    tr = run_bps_continuous(IsotropicGaussian(3), BpsConfig(0.7, 500, RateParams(1.0, 0.0, 1e-9), seed=2),
                            initial=init)
    assert tr.counters.bounces > 100 and tr.counters.refreshes == 0
    speed = np.linalg.norm(tr.v, axis=1)
    np.testing.assert_allclose(speed, np.linalg.norm(init.v), rtol=1e-12)


def test_refresh_changes_speed():
    tr = run_bps_continuous(IsotropicGaussian(3), BpsConfig(1.0, 200, RateParams(1.0, 0.0, 2.0), seed=2))
    assert np.ptp(np.linalg.norm(tr.v, axis=1)) > 0.1


def test_no_jumps_when_alpha_j_zero():
    tr = run_bps_mixed(gmm24(), SuwaTodoKernel(), BpsConfig(1.0, 500, RateParams(1, 0.0, 1), seed=4))
    assert tr.counters.jumps == 0
    assert np.all(tr.y == tr.y[0])


def test_two_state_symmetric_occupancy():
    # the potential does not depend on y and the kernel is symmetric
    m = GaussianMixtureModel([0.5, 0.5], np.zeros((2, 1)), 1.0)
    tr = run_bps_mixed(m, MHUniformKernel(), BpsConfig(1.0, 40_000, RateParams(1, 1.0, 1), seed=5))
    occ = np.bincount(tr.y, minlength=2) / len(tr)
    assert abs(occ[0] - 0.5) < 0.01
    assert tr.counters.jumps > 10_000


def test_mixed_needs_two_states():
    with pytest.raises(DomainError):
        run_bps_mixed(IsotropicGaussian(1), None, BpsConfig(1.0, 10))


def test_continuous_rejects_discrete_target():
    with pytest.raises(DomainError):
        run_bps_continuous(gmm24(), BpsConfig(1.0, 10))


def test_refresh_rate_sets_lag_one_correlation():
    # frequent refresh turns the motion diffusive, so neighbouring samples get closer
    m = IsotropicGaussian(1)
    r = {}
    for lam in (1.0, 1000.0):
        tr = run_bps_continuous(m, BpsConfig(1.0, 5000, RateParams(1, 0, lam), seed=6))
        r[lam] = lag1(tr.x[:, 0])
    assert r[1000.0] > r[1.0]
    assert r[1000.0] > 0.9


@pytest.mark.parametrize("n", [0, -3])
def test_config_rejects_empty_run(n):
    with pytest.raises(ConfigError):
        BpsConfig(1.0, n)


def test_config_collects_all_violations():
    with pytest.raises(ConfigError) as exc:
        BpsConfig(0.0, 0, seed=-1)
    assert len(exc.value.violations) == 3


def test_same_seed_same_trace():
    cfg = BpsConfig(1.0, 300, RateParams(1, 4, 1), seed=9)
    a = run_bps_mixed(gmm24(), SuwaTodoKernel(), cfg)
    b = run_bps_mixed(gmm24(), SuwaTodoKernel(), cfg)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.y, b.y)
    assert a.counters == b.counters


class TestCsv:
    def test_round_trip(self, tmp_path):
        tr = run_bps_mixed(gmm24(), SuwaTodoKernel(), BpsConfig(0.5, 50, RateParams(1, 4, 1), seed=1))
        back = SampleTrace.from_csv(tr.to_csv(tmp_path / "t.csv"))
        np.testing.assert_array_equal(back.times, tr.times)
        np.testing.assert_array_equal(back.x, tr.x)
        np.testing.assert_array_equal(back.y, tr.y)
        np.testing.assert_array_equal(back.v, tr.v)

    def test_header(self, tmp_path):
        tr = run_bps_continuous(IsotropicGaussian(2), BpsConfig(1.0, 3, seed=0))
        head = (tmp_path / "t.csv")
        tr.to_csv(head)
        assert head.read_text().splitlines()[0] == "t,x_1,x_2,y,v_1,v_2"

    def test_without_velocity(self, tmp_path):
        tr = run_bps_continuous(IsotropicGaussian(2), BpsConfig(1.0, 3, seed=0, record_velocity=False))
        back = SampleTrace.from_csv(tr.to_csv(tmp_path / "t.csv"))
        assert back.v is None and back.x.shape == (3, 2)

    @pytest.mark.parametrize("text", ["", "a,b\n1,2\n", "t,x_1,y\n", "t,x_1,y\n0.1,abc,0\n", "t,x_2,y\n1,2,0\n"])
    def test_bad_files(self, tmp_path, text):
        p = tmp_path / "bad.csv"
        p.write_text(text)
        with pytest.raises(DataError):
            SampleTrace.from_csv(p)


def test_summary_json(tmp_path):
    import json

    tr = run_bps_continuous(IsotropicGaussian(1), BpsConfig(1.0, 20, seed=0))
    doc = json.loads(write_summary(tmp_path / "s.json", tr, {"seed": 0}).read_text())
    assert doc["config"] == {"seed": 0}
    assert doc["traces"][0]["num_samples"] == 20
    assert set(doc["traces"][0]["counters"]) >= {"bounces", "jumps", "refreshes"}
