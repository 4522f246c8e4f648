import numpy as np
import pytest

from bpspt import _backend
from bpspt.bps import BpsConfig, run_bps_continuous, run_bps_mixed
from bpspt.core import RateParams
from bpspt.errors import ConfigError
from bpspt.kernels import MHUniformKernel, SuwaTodoKernel
from bpspt.models import Bimodal1D, IsotropicGaussian, NealModel, gmm24
from bpspt.tempering import Ladder, PartitionPair, run_bpspt_finite, run_bpspt_infinite

from test_tempering import LinearU

needs_core = pytest.mark.skipif(not _backend.HAVE_CORE, reason="compiled core not built")


def both(fn):
    a = fn("python")
    b = fn("compiled")
    assert a.meta["backend"] == "python" and b.meta["backend"] == "compiled"
    return a, b


def assert_same(a, b, tol=1e-9):
    assert a.counters == b.counters
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_allclose(a.x, b.x, rtol=0, atol=tol)
    np.testing.assert_allclose(a.v, b.v, rtol=0, atol=tol)


@needs_core
@pytest.mark.parametrize("model", [IsotropicGaussian(3), Bimodal1D()], ids=["gauss", "bimodal"])
def test_continuous_parity(model):
    cfg = BpsConfig(0.5, 300, RateParams(1, 0, 1), seed=1)
    assert_same(*both(lambda be: run_bps_continuous(model, cfg, backend=be)))


@needs_core
@pytest.mark.parametrize("model,kernel,rates,n,tol", [
    (gmm24(), SuwaTodoKernel(), RateParams(1, 4, 1), 200, 1e-9),
    (gmm24(), MHUniformKernel(), RateParams(1, 4, 1), 200, 1e-9),
    # the narrow Neal ridge amplifies last-bit differences roughly tenfold per
    # few samples, so parity is only checked on a short run
    (NealModel(), MHUniformKernel(), RateParams(1, 20, 0.1), 20, 1e-6),
], ids=["gmm-st", "gmm-mh", "neal"])
def test_mixed_parity(model, kernel, rates, n, tol):
    cfg = BpsConfig(1.0, n, rates, seed=2)
    assert_same(*both(lambda be: run_bps_mixed(model, kernel, cfg, backend=be)), tol)


@needs_core
def test_infinite_parity():
    pp = PartitionPair.from_one_based([[1, 2], [3]], [[1], [2, 3]], 0.1, 5)
    cfg = BpsConfig(0.5, 60, RateParams(1, 4, 1), seed=3)
    ra = run_bpspt_infinite(gmm24(), SuwaTodoKernel(), Ladder([1, 0.7, 0.4]), pp, cfg, backend="python")
    rb = run_bpspt_infinite(gmm24(), SuwaTodoKernel(), Ladder([1, 0.7, 0.4]), pp, cfg, backend="compiled")
    for a, b in zip(ra.traces, rb.traces):
        assert_same(a, b)


@needs_core
def test_finite_parity():
    cfg = BpsConfig(0.5, 100, RateParams(1, 20, 0.1), seed=4)
    ra = run_bpspt_finite(NealModel(), MHUniformKernel(), Ladder([1, 0.6, 0.2]), 1.0, cfg, backend="python")
    rb = run_bpspt_finite(NealModel(), MHUniformKernel(), Ladder([1, 0.6, 0.2]), 1.0, cfg, backend="compiled")
    np.testing.assert_array_equal(ra.assignment, rb.assignment)
    for a, b in zip(ra.traces, rb.traces):
        assert_same(a, b)


def test_env_forces_python(monkeypatch):
    monkeypatch.setenv("BPSPT_BACKEND", "python")
    tr = run_bps_continuous(IsotropicGaussian(1), BpsConfig(1.0, 10))
    assert tr.meta["backend"] == "python"


def test_bad_env(monkeypatch):
    monkeypatch.setenv("BPSPT_BACKEND", "gpu")
    with pytest.raises(ConfigError):
        run_bps_continuous(IsotropicGaussian(1), BpsConfig(1.0, 10))


def test_fallback_when_core_missing(monkeypatch):
    monkeypatch.setattr(_backend, "HAVE_CORE", False)
    assert _backend.resolve(gmm24(), SuwaTodoKernel(), RateParams())[0] == "python"
    with pytest.raises(ConfigError):
        _backend.resolve(gmm24(), SuwaTodoKernel(), RateParams(), backend="compiled")


def test_custom_model_uses_python():
    # user-defined targets have no compiled description
    assert LinearU().core_spec() is None
    assert _backend.resolve(LinearU(), None, RateParams())[0] == "python"
    with pytest.raises(ConfigError):
        _backend.resolve(LinearU(), None, RateParams(), backend="compiled")
