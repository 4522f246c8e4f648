"""Parallel tempering: finite exchange rate and infinite swapping over subgroups."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import _backend
from .bps import BpsConfig, SampleTrace
from .core import EventCounters, MixedState, initial_state, make_rng
from .engine import permutation_table, permutation_weights
from .errors import ConfigError, DataError, DomainError
from .events import AffineEnvelope

FACTORIAL_CAP = 6


class Ladder:
    """Inverse temperatures ``1 = beta_1 > beta_2 > ... > beta_L > 0``."""

    def __init__(self, betas: Sequence[float], strict: bool = True):
        b = np.asarray(betas, dtype=float).reshape(-1)
        errs = []
        if b.size == 0:
            errs.append("ladder is empty")
        else:
            if b[0] != 1.0:
                errs.append(f"beta_1 must equal 1, got {b[0]}")
            if np.any(b <= 0) or np.any(~np.isfinite(b)):
                errs.append("betas must be finite and positive")
            # equal neighbours are only allowed for test ladders
            if strict and np.any(np.diff(b) >= 0):
                errs.append("betas must be strictly decreasing")
            if not strict and np.any(np.diff(b) > 0):
                errs.append("betas must be non-increasing")
        if errs:
            raise ConfigError(errs)
        self.betas = b
        self.betas.setflags(write=False)

    @classmethod
    def linear(cls, n: int, step: float) -> "Ladder":
        """``beta_i = 1 - step * (i - 1)`` for ``i = 1..n``."""
        return cls([round(1.0 - step * i, 12) for i in range(n)])

    def __len__(self):
        return self.betas.size

    def __getitem__(self, i):
        return self.betas[i]

    def __repr__(self):
        return f"Ladder({self.betas.tolist()})"


def _union_find_connected(n: int, blocks) -> bool:
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for block in blocks:
        r0 = find(block[0])
        for j in block[1:]:
            parent[find(j)] = r0
    return len({find(i) for i in range(n)}) == 1


def _interleaved(first, second) -> bool:
    n = len(first)
    if n != len(second) or n < 1:
        return False
    f = [set(s) for s in first]
    s = [set(t) for t in second]
    if not (f[0] < s[0] and s[-1] < f[-1]):
        return False
    if any(not (f[i] & s[i]) for i in range(n)):
        return False
    return all(s[i - 1] & f[i] for i in range(1, n))


@dataclass(frozen=True)
class PartitionPair:
    """Two partitions of the ladder slots used on alternating epochs.

    Blocks hold 0-based slot indices. ``A`` is used on even epochs and
    ``B`` on odd ones, each for ``t_beta``; a sample is taken every
    ``n_s`` epochs.
    """

    A: tuple
    B: tuple
    t_beta: float
    n_s: int
    L: int
    cap: int = FACTORIAL_CAP

    def __post_init__(self):
        A = tuple(tuple(sorted(int(i) for i in blk)) for blk in self.A)
        B = tuple(tuple(sorted(int(i) for i in blk)) for blk in self.B)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        errs = []
        if not self.t_beta > 0:
            errs.append(f"t_beta must be > 0, got {self.t_beta}")
        if not (isinstance(self.n_s, (int, np.integer)) and self.n_s >= 1):
            errs.append(f"n_s must be an integer >= 1, got {self.n_s}")
        full = set(range(self.L))
        for name, part in (("A", A), ("B", B)):
            flat = [i for blk in part for i in blk]
            if any(len(blk) == 0 for blk in part):
                errs.append(f"{name} has an empty block")
            if len(flat) != len(set(flat)) or set(flat) != full:
                errs.append(f"{name} must partition slots 0..{self.L - 1}")
            big = [blk for blk in part if len(blk) > self.cap]
            if big:
                errs.append(f"{name} block of size {len(big[0])} exceeds the cap {self.cap}")
        if not errs:
            trivial = self.L == 1 or len(A) == 1 or len(B) == 1
            if not (trivial or _interleaved(A, B) or _interleaved(B, A)):
                errs.append("partitions do not satisfy the interleaving conditions in either order")
            if not _union_find_connected(self.L, A + B):
                errs.append("partitions do not generate the full permutation group")
        if errs:
            raise ConfigError(errs)

    @classmethod
    def from_one_based(cls, A, B, t_beta: float, n_s: int, L: Optional[int] = None, cap: int = FACTORIAL_CAP):
        A0 = [[i - 1 for i in blk] for blk in A]
        B0 = [[i - 1 for i in blk] for blk in B]
        if L is None:
            L = sum(len(blk) for blk in A0)
        return cls(A0, B0, t_beta, n_s, L, cap)

    @classmethod
    def single(cls, L: int, t_beta: float, n_s: int = 1, cap: int = FACTORIAL_CAP):
        """Every slot in one block (full infinite swapping)."""
        return cls([list(range(L))], [list(range(L))], t_beta, n_s, L, cap)

    @property
    def sample_interval(self) -> float:
        return self.n_s * self.t_beta

    def transpositions(self) -> set:
        """All transpositions generated by the two partitions."""
        reach = set()
        comps = {}
        parent = list(range(self.L))

        def find(i):
            while parent[i] != i:
                i = parent[i]
            return i

        for blk in self.A + self.B:
            for j in blk[1:]:
                ra, rb = find(blk[0]), find(j)
                if ra != rb:
                    parent[rb] = ra
        for i in range(self.L):
            comps.setdefault(find(i), []).append(i)
        for members in comps.values():
            for a in members:
                for b in members:
                    if a < b:
                        reach.add((a, b))
        return reach


@dataclass
class ReplicaEnsemble:
    """One particle per ladder slot; ``particles[i]`` sits at ``betas[i]``."""

    particles: list
    ladder: Ladder

    def __post_init__(self):
        if len(self.particles) != len(self.ladder):
            raise DomainError("need exactly one particle per ladder slot")

    @classmethod
    def initialize(cls, model, ladder: Ladder, rng, scale: float = 3.0) -> "ReplicaEnsemble":
        return cls([initial_state(model, rng, scale) for _ in range(len(ladder))], ladder)

    def arrays(self):
        X = np.array([p.x for p in self.particles], dtype=float)
        Y = np.array([p.y for p in self.particles], dtype=np.int64)
        V = np.array([p.v for p in self.particles], dtype=float)
        return X, Y, V

    def potentials(self, model) -> np.ndarray:
        return np.array([model.potential(p.x, p.y) for p in self.particles])


class SubsetWeights(NamedTuple):
    """Distribution over the permutations of one block.

    ``perms[p, j]`` is the position (within the block) of the temperature
    given to member ``j`` under permutation ``p``.
    """

    subset: tuple
    perms: np.ndarray
    log_probs: np.ndarray
    probs: np.ndarray
    marginals: np.ndarray


def exchange_acceptance(model, ensemble: ReplicaEnsemble, sigma, sigma_prime) -> float:
    """``min(1, exp(Σ_i (beta_{sigma(i)} - beta_{sigma'(i)}) U_i))``.

    ``sigma[i]`` is the ladder slot of particle ``i``.
    """
    b = ensemble.ladder.betas
    u = ensemble.potentials(model)
    s = np.asarray(sigma)
    sp = np.asarray(sigma_prime)
    if s.shape != (len(b),) or sp.shape != (len(b),):
        raise DomainError("permutations must act on every slot")
    log_g = float(np.sum((b[s] - b[sp]) * u))
    return math.exp(min(0.0, log_g))


def subset_weights(model, ensemble: ReplicaEnsemble, subset, betas=None, cap: int = FACTORIAL_CAP) -> SubsetWeights:
    """Permutation weights of the particles in slots ``subset``.

    The log-weight of ``sigma`` is ``-Σ_j beta_{sigma(j)} U(x_j, y_j)``.
    """
    subset = tuple(int(i) for i in subset)
    if len(subset) > cap:
        raise ConfigError([f"subset of size {len(subset)} exceeds the factorial cap {cap}"])
    if betas is None:
        betas = ensemble.ladder.betas[list(subset)]
    u = np.array([model.potential(ensemble.particles[i].x, ensemble.particles[i].y) for i in subset])
    perms = permutation_table(len(subset))
    log_p, p, marg = permutation_weights(u, betas, perms)
    return SubsetWeights(subset, perms, log_p, p, marg)


def effective_inverse_temperature(weights: SubsetWeights, betas, i: int) -> float:
    """``Σ_sigma beta_{sigma(i)} omega_sigma`` for block member ``i``."""
    return float(np.dot(weights.marginals[i], np.asarray(betas, dtype=float)))


def infinite_jump_rate(weights: SubsetWeights, kernel, model, x_i, y_i, y_new, betas, i: int,
                       alpha_j: float = 1.0) -> float:
    """``alpha_j Σ_sigma omega_sigma w_{beta_sigma(i)}(y' | x, y)``; never above ``alpha_j``."""
    nbrs, w = kernel.weights_multi(model, x_i, int(y_i), np.asarray(betas, dtype=float))
    hit = np.flatnonzero(nbrs == y_new)
    if hit.size == 0:
        raise DomainError(f"{y_new} is not a neighbor of {y_i}")
    return alpha_j * float(np.dot(weights.marginals[i], w[:, hit[0]]))


def total_event_envelope(model, ensemble: ReplicaEnsemble, subset, betas, horizon: float,
                         alpha_b: float = 1.0, alpha_j: float = 0.0) -> AffineEnvelope:
    """One affine bound on the summed bounce and jump rates of a block.

    Each member contributes ``beta_max * alpha_b * max(0, a + b t)``;
    each clipped term is replaced by its chord over ``[0, horizon]``,
    which lies above it by convexity. A lone member without jumps
    keeps its own envelope.
    """
    betas = np.asarray(betas, dtype=float)
    bmax = float(betas.max())
    envs = []
    for i in subset:
        p = ensemble.particles[i]
        envs.append(model.envelope(p.x, p.y, p.v, bmax, horizon, alpha_b))
    c = len(envs) * alpha_j
    if len(envs) == 1 and c == 0.0:
        return envs[0]
    a_tot = c
    b_tot = 0.0
    for e in envs:
        lo = max(0.0, e.a)
        hi = max(0.0, e.a + e.b * horizon)
        a_tot += lo
        b_tot += (hi - lo) / horizon
    return AffineEnvelope(a_tot, b_tot, horizon)


def resample_subset_assignment(weights: SubsetWeights, rng) -> np.ndarray:
    """Draw ``sigma ~ omega``; member ``j`` moves to block position ``sigma[j]``."""
    cum = np.cumsum(weights.probs)
    p = min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), len(cum) - 1)
    return weights.perms[p].copy()


def rearrange_trace(xs, ys, vs, assign):
    """Per-slot view of raw per-replica samples.

    ``assign[k, s]`` is the replica sitting at slot ``s`` at sample ``k``.
    """
    xs = np.asarray(xs)
    assign = np.asarray(assign)
    n, L = xs.shape[0], xs.shape[1]
    if assign.shape != (n, L):
        raise DataError(f"assignment history has shape {assign.shape}, expected {(n, L)}")
    if np.any(np.sort(assign, axis=1) != np.arange(L)):
        raise DataError("assignment rows must be permutations of the replicas")
    rows = np.arange(n)[:, None]
    out_v = None if vs is None else np.asarray(vs)[rows, assign]
    return xs[rows, assign], np.asarray(ys)[rows, assign], out_v


def invert_assignment(assign) -> np.ndarray:
    """``slot_of[k, r]`` from ``assign[k, s]``."""
    assign = np.asarray(assign)
    inv = np.empty_like(assign)
    rows = np.arange(assign.shape[0])[:, None]
    inv[rows, assign] = np.arange(assign.shape[1])[None, :]
    return inv


@dataclass
class PTResult:
    """Per-slot traces plus run bookkeeping."""

    traces: list
    ladder: Ladder
    counters: EventCounters
    meta: dict = field(default_factory=dict)
    assignment: Optional[np.ndarray] = None
    raw: Optional[tuple] = None

    def __getitem__(self, slot) -> SampleTrace:
        return self.traces[slot]

    def report(self) -> dict:
        c = self.counters
        return {
            "betas": self.ladder.betas.tolist(),
            "swaps_proposed": c.swaps_proposed,
            "swaps_accepted": c.swaps_accepted,
            "swap_acceptance": c.swaps_accepted / c.swaps_proposed if c.swaps_proposed else None,
            **self.meta,
        }


def _ensemble(model, ladder_or_ensemble, rng_for_slot, cfg):
    if isinstance(ladder_or_ensemble, ReplicaEnsemble):
        return ladder_or_ensemble
    ladder = ladder_or_ensemble if isinstance(ladder_or_ensemble, Ladder) else Ladder(ladder_or_ensemble)
    return ReplicaEnsemble([initial_state(model, rng_for_slot(i), cfg.init_scale) for i in range(len(ladder))],
                           ladder)


def _traces(xs, ys, vs, ladder, dt, counters, cfg, meta):
    n = xs.shape[0]
    times = dt * np.arange(1, n + 1)
    return [SampleTrace(times, xs[:, s].copy(), ys[:, s].copy(),
                        vs[:, s].copy() if cfg.record_velocity else None, counters, float(ladder[s]),
                        dict(meta, slot=s))
            for s in range(len(ladder))]


def run_bpspt_infinite(model, kernel, ladder_or_ensemble, partition: PartitionPair, cfg: BpsConfig,
                       backend: Optional[str] = None) -> PTResult:
    """Infinite-swap BPS-PT over the two partitions of ``partition``.

    Within an epoch every block evolves under the permutation-averaged
    rates; at its end the block's temperature assignment is redrawn. The
    sample interval is ``partition.n_s * partition.t_beta``; a different
    ``cfg.sample_interval`` is rejected.
    """
    if not math.isclose(cfg.sample_interval, partition.sample_interval, rel_tol=1e-12):
        raise ConfigError([f"sample_interval {cfg.sample_interval} != n_s * t_beta = {partition.sample_interval}"])
    rng = make_rng(cfg.seed, 0)
    ens = _ensemble(model, ladder_or_ensemble, lambda i: rng, cfg)
    if len(ens.ladder) != partition.L:
        raise ConfigError([f"partition is for {partition.L} slots, ladder has {len(ens.ladder)}"])
    X, Y, V = ens.arrays()
    t0 = time.perf_counter()
    name, (xs, ys, vs, counts) = _backend.swap_chain(
        model, kernel, X, Y, V, ens.ladder.betas, [partition.A, partition.B], partition.t_beta, partition.n_s,
        cfg.num_samples, cfg.rates, rng, cfg.debug, backend)
    counters = EventCounters.from_array(counts)
    meta = {"backend": name, "wall_time": time.perf_counter() - t0, "seed": int(cfg.seed),
            "sampler": "bpspt-infinite"}
    return PTResult(_traces(xs, ys, vs, ens.ladder, partition.sample_interval, counters, cfg, meta),
                    ens.ladder, counters, meta)


def run_bpspt_finite(model, kernel, ladder_or_ensemble, alpha_s: float, cfg: BpsConfig,
                     backend: Optional[str] = None) -> PTResult:
    """Replica exchange at rate ``alpha_s`` per adjacent pair.

    Replica ``r`` draws from its own stream ``(seed, r)`` and the exchange
    clock from ``(seed, L)``, so with ``alpha_s = 0`` replica 0 repeats
    the plain BPS chain with the same seed.
    """
    if not alpha_s >= 0:
        raise ConfigError([f"alpha_s must be >= 0, got {alpha_s}"])
    probe = ladder_or_ensemble.ladder if isinstance(ladder_or_ensemble, ReplicaEnsemble) else ladder_or_ensemble
    L = len(probe)
    rngs = [make_rng(cfg.seed, r) for r in range(L)]
    ens = _ensemble(model, ladder_or_ensemble, lambda i: rngs[i], cfg)
    X, Y, V = ens.arrays()
    t0 = time.perf_counter()
    name, (xs, ys, vs, assign, counts) = _backend.finite_chain(
        model, kernel, X, Y, V, ens.ladder.betas, alpha_s, cfg.sample_interval, cfg.num_samples, cfg.rates,
        rngs, make_rng(cfg.seed, L), cfg.debug, backend)
    counters = EventCounters.from_array(counts)
    meta = {"backend": name, "wall_time": time.perf_counter() - t0, "seed": int(cfg.seed),
            "sampler": "bpspt-finite", "alpha_s": float(alpha_s)}
    sx, sy, sv = rearrange_trace(xs, ys, vs, assign)
    return PTResult(_traces(sx, sy, sv, ens.ladder, cfg.sample_interval, counters, cfg, meta),
                    ens.ladder, counters, meta, assign, (xs, ys, vs))


def mean_effective_betas(model, result: PTResult, partition: PartitionPair, which: str = "A") -> np.ndarray:
    """Average ``beta_bar`` of every slot over the recorded samples."""
    part = partition.A if which == "A" else partition.B
    betas = result.ladder.betas
    n = len(result.traces[0])
    out = np.zeros(len(betas))
    for k in range(n):
        for blk in part:
            u = np.array([model.potential(result.traces[s].x[k], result.traces[s].y[k]) for s in blk])
            _, _, marg = permutation_weights(u, betas[list(blk)], permutation_table(len(blk)))
            out[list(blk)] += marg @ betas[list(blk)]
    return out / n
