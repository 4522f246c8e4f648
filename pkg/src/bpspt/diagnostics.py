"""Sample-quality metrics: KS distance, ESS, and discrete KLD / MSE."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError, DomainError


def ks_two_sample(a, b) -> float:
    """Sup distance between the empirical CDFs of ``a`` and ``b``."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise DomainError("both samples must be non-empty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_one_sample(a, cdf) -> float:
    """Sup distance between the empirical CDF of ``a`` and ``cdf``."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    if a.size == 0:
        raise DomainError("sample must be non-empty")
    n = a.size
    f = np.asarray(cdf(a), dtype=float)
    hi = np.arange(1, n + 1) / n - f
    lo = f - np.arange(n) / n
    return float(max(hi.max(), lo.max()))


def autocovariance(chain, lag: int) -> float:
    """Biased autocovariance ``(1/N) Σ_t (x_t - m)(x_{t+lag} - m)``."""
    x = np.asarray(chain, dtype=float).ravel()
    x = x - x.mean()
    return float(np.dot(x[: x.size - lag], x[lag:]) / x.size)


def ess(chain) -> float:
    """Effective sample size with Geyer's initial positive sequence.

    Pairs ``rho_{2k} + rho_{2k+1}`` are summed while positive; the result
    ``N / (1 + 2 Σ rho)`` is clamped to ``(0, N]``.
    """
    x = np.asarray(chain, dtype=float).ravel()
    n = x.size
    if n < 10:
        raise DomainError("chain must have at least 10 samples")
    if not np.all(np.isfinite(x)):
        raise DomainError("chain has non-finite values")
    xc = x - x.mean()
    g0 = float(np.dot(xc, xc)) / n
    if g0 <= 0.0 or np.ptp(x) == 0.0:
        raise DomainError("zero-variance chain")
    # -1 + 2 Σ_k (rho_2k + rho_2k+1) == 1 + 2 Σ_{t>=1} rho_t
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = (float(np.dot(xc[: n - k], xc[k:])) + float(np.dot(xc[: n - k - 1], xc[k + 1:]))) / (n * g0)
        if pair <= 0.0:
            break
        tau += 2.0 * pair
    if tau <= 0.0:
        tau = 1.0 / n
    return float(min(n, n / tau))


def kld_discrete(p, q_counts, smoothing: float = 0.0) -> float:
    """``Σ_k p_k ln(p_k / q_k)`` with ``q`` the empirical frequencies of ``q_counts``.

    Returns ``inf`` when some ``q_k = 0`` where ``p_k > 0``. A positive
    ``smoothing`` adds that pseudo-count to every cell first, which keeps
    the value finite at the cost of a bias of order ``smoothing / N``.
    """
    p = np.asarray(p, dtype=float).ravel()
    c = np.asarray(q_counts, dtype=float).ravel()
    if p.shape != c.shape:
        raise DomainError("p and counts must have equal length")
    if abs(p.sum() - 1.0) > 1e-9 or np.any(p < 0):
        raise DomainError("p must be a probability vector")
    if np.any(c < 0) or smoothing < 0:
        raise DomainError("counts and smoothing must be non-negative")
    c = c + smoothing
    if c.sum() <= 0:
        raise DomainError("counts must total at least 1")
    q = c / c.sum()
    mask = p > 0
    if np.any(q[mask] == 0):
        return math.inf
    return float(max(0.0, np.sum(p[mask] * np.log(p[mask] / q[mask]))))


def mse_discrete(truth, estimates) -> float:
    t = np.asarray(truth, dtype=float).ravel()
    e = np.asarray(estimates, dtype=float).ravel()
    if t.shape != e.shape:
        raise DomainError("truth and estimates must have equal length")
    return float(np.mean((t - e) ** 2))


def cluster_probabilities(trace_or_labels, n_states: int) -> np.ndarray:
    y = np.asarray(getattr(trace_or_labels, "y", trace_or_labels), dtype=np.int64).ravel()
    if y.size == 0:
        raise DomainError("empty trace")
    if y.min() < 0 or y.max() >= n_states:
        raise DataError("labels outside the state set")
    return np.bincount(y, minlength=n_states) / y.size


def bit_marginals(labels, n_bits: int) -> np.ndarray:
    """``P(bit i = 1)`` estimated from packed integer labels."""
    y = np.asarray(labels, dtype=np.int64).ravel()
    if y.size == 0:
        raise DomainError("empty trace")
    return ((y[:, None] >> np.arange(n_bits)) & 1).mean(axis=0)


def max_ks(x, ref) -> tuple[float, np.ndarray]:
    """Per-component KS statistics and their maximum."""
    x = np.asarray(x, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if x.ndim != 2 or ref.ndim != 2 or x.shape[1] != ref.shape[1]:
        raise DataError("samples and reference must be (n, dim) with equal dim")
    per = np.array([ks_two_sample(x[:, i], ref[:, i]) for i in range(x.shape[1])])
    return float(per.max()), per


def min_ess(x) -> tuple[float, np.ndarray]:
    x = np.asarray(x, dtype=float)
    per = np.array([ess(x[:, i]) for i in range(x.shape[1])])
    return float(per.min()), per


def prefix_ks_curve(x, ref, points: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Max-over-components KS of the first ``n`` samples for log-spaced ``n``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    ns = np.unique(np.geomspace(min(10, n), n, points).astype(int))
    vals = np.array([max_ks(x[:k], ref)[0] for k in ns])
    return ns, vals


def ks_trend_slope(ns, vals) -> float:
    """Least-squares slope of the KS curve against ``log n``."""
    return float(np.polyfit(np.log(np.asarray(ns, dtype=float)), np.asarray(vals, dtype=float), 1)[0])


@dataclass
class DiagnosticsReport:
    """Metrics of one or more chains against a reference sample.

    ``max_ks`` is the maximum over components of the KS statistic,
    averaged over chains; ``min_ess`` is the minimum over components of
    the ESS, averaged over chains.
    """

    n_samples: int
    n_chains: int
    ks: list
    max_ks: float
    ess: list
    min_ess: float
    min_ess_per_sample: float
    kld: Optional[float] = None
    mse: Optional[float] = None
    discrete_estimate: Optional[list] = None
    extra: dict = field(default_factory=dict)

    def to_json(self, path=None) -> str:
        text = json.dumps(asdict(self), indent=2, default=_default)
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["component", "ks", "ess"])
            for i, (k, e) in enumerate(zip(self.ks, self.ess)):
                w.writerow([i + 1, repr(float(k)), repr(float(e))])
        return path


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def diagnose_chains(chains_x, chains_y, ref_x, model=None, truth=None, metric: Optional[str] = None,
                    n_states: Optional[int] = None) -> DiagnosticsReport:
    """Aggregate metrics over chains.

    ``chains_x`` is a list of ``(n, dim)`` arrays; ``ref_x`` an exact
    reference sample. Discrete metrics pool all chains: ``kld`` compares
    cluster frequencies with ``truth``, ``mse`` compares per-bit means.
    """
    if not chains_x:
        raise DataError("no chains")
    ks_rows = []
    ess_rows = []
    for x in chains_x:
        ks_rows.append(max_ks(x, ref_x)[1])
        ess_rows.append(min_ess(x)[1])
    ks_arr = np.array(ks_rows)
    ess_arr = np.array(ess_rows)
    n = chains_x[0].shape[0]
    rep = DiagnosticsReport(
        n_samples=int(n), n_chains=len(chains_x),
        ks=ks_arr.mean(axis=0).tolist(), max_ks=float(ks_arr.max(axis=1).mean()),
        ess=ess_arr.mean(axis=0).tolist(), min_ess=float(ess_arr.min(axis=1).mean()),
        min_ess_per_sample=float(ess_arr.min(axis=1).mean() / n),
    )
    if metric is None and model is not None:
        metric = getattr(model, "discrete_metric", None)
    if truth is None and model is not None and hasattr(model, "discrete_truth"):
        truth = model.discrete_truth()
    ys = np.concatenate([np.asarray(y).ravel() for y in chains_y]) if chains_y else None
    if metric == "kld" and truth is not None:
        k = n_states or len(truth)
        counts = np.bincount(ys, minlength=k)
        rep.kld = kld_discrete(truth, counts)
        rep.discrete_estimate = (counts / counts.sum()).tolist()
    elif metric == "mse" and truth is not None:
        est = bit_marginals(ys, len(truth))
        rep.mse = mse_discrete(truth, est)
        rep.discrete_estimate = est.tolist()
    return rep
