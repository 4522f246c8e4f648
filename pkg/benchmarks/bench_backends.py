"""Wall time of the compiled core against the pure-Python engine.

Both backends consume the same random streams, so each pair of runs
produces the same trace; the script checks that before timing.

    python benchmarks/bench_backends.py [--repeat 3] [--scale 1.0]
"""

import argparse
import time

import numpy as np

from bpspt import _backend
from bpspt.bps import BpsConfig, run_bps_continuous, run_bps_mixed
from bpspt.core import RateParams
from bpspt.kernels import MHUniformKernel, SuwaTodoKernel
from bpspt.models import IsotropicGaussian, NealModel, gmm24
from bpspt.tempering import Ladder, PartitionPair, run_bpspt_finite, run_bpspt_infinite


def cases(scale):
    n = lambda k: max(1, int(k * scale))
    gmm_pp = PartitionPair.from_one_based([[1, 2, 3, 4], [5, 6, 7, 8], [9, 10]],
                                          [[1, 2], [3, 4, 5, 6], [7, 8, 9, 10]], 0.1, 10)
    gmm_ladder = Ladder.linear(10, 0.1)
    return {
        "gauss-10d bps": lambda be: run_bps_continuous(
            IsotropicGaussian(10), BpsConfig(1.0, n(2000), RateParams(1, 0, 1), seed=1), backend=be),
        "gmm24 bps-mixed": lambda be: run_bps_mixed(
            gmm24(), SuwaTodoKernel(), BpsConfig(1.0, n(2000), RateParams(1, 4, 1), seed=1), backend=be),
        "neal bps-mixed": lambda be: run_bps_mixed(
            NealModel(), MHUniformKernel(), BpsConfig(1.0, n(500), RateParams(1, 20, 0.1), seed=1), backend=be),
        "gmm24 bpspt-infinite": lambda be: run_bpspt_infinite(
            gmm24(), SuwaTodoKernel(), gmm_ladder, gmm_pp, BpsConfig(1.0, n(20), RateParams(1, 4, 1), seed=1),
            backend=be).traces[0],
        "neal bpspt-finite": lambda be: run_bpspt_finite(
            NealModel(), MHUniformKernel(), Ladder.linear(5, 0.2), 1.0,
            BpsConfig(1.0, n(100), RateParams(1, 20, 0.1), seed=1), backend=be).traces[0],
    }


def timed(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0, help="multiplies every run length")
    args = ap.parse_args(argv)
    if not _backend.HAVE_CORE:
        raise SystemExit("compiled core is not built; run pip install -e . --no-build-isolation")

    print(f"{'case':24s} {'python s':>10s} {'compiled s':>11s} {'speedup':>8s}  events  same-start")
    for name, run in cases(args.scale).items():
        tp, a = timed(lambda: run("python"), args.repeat)
        tc, b = timed(lambda: run("compiled"), args.repeat)
        # traces agree to rounding at the start; chaotic targets drift later
        same = bool(np.allclose(a.x[:5], b.x[:5], atol=1e-8))
        events = a.counters.bounces + a.counters.jumps + a.counters.refreshes
        print(f"{name:24s} {tp:10.3f} {tc:11.4f} {tp / tc:8.1f}  {events:6d}  {same}")


if __name__ == "__main__":
    main()
