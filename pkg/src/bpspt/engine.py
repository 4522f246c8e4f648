"""Reference (pure Python) event loop shared by every simulator.

A *block* is a set of particles evolved jointly at the inverse temperatures
of the ladder slots they occupy. Plain BPS is a single one-particle block;
infinite-swap tempering runs one block per partition subset; finite-rate
tempering runs every replica as its own block between exchange events.

Random draws inside a block follow a fixed order, which the compiled core
reproduces:

1. one exponential per member (refresh clocks, member order);
2. per envelope proposal, one exponential, then one uniform if the
   proposal lands inside its horizon;
3. on acceptance, one uniform to pick ``(member, bounce|jump)`` and, for a
   jump, one uniform to pick the new label;
4. on refresh, ``dim`` standard normals;
5. at the end of an epoch, one uniform to draw the permutation of a block
   with more than one member.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import DivergenceError, DominanceError, KernelError
from .events import DOMINANCE_SLACK, clipped_sum_rate, invert_clipped_sum

# positions in the counter array, see EventCounters.to_array
PROPOSALS, REJECTIONS, BOUNCES, JUMPS, REFRESHES, SWAPS_PROPOSED, SWAPS_ACCEPTED = range(7)


def permutation_table(m: int) -> np.ndarray:
    """All permutations of ``range(m)`` in lexicographic order, one per row."""
    return np.array(list(itertools.permutations(range(m))), dtype=np.intp).reshape(-1, m)


def permutation_weights(u, betas, perms):
    """Normalized ``omega_sigma ∝ exp(-Σ_j beta_{sigma(j)} U_j)`` and its marginals.

    Returns ``(log_w, w, M)`` with ``M[j, k] = Σ_{sigma(j)=k} omega_sigma``.
    """
    u = np.asarray(u, dtype=float)
    betas = np.asarray(betas, dtype=float)
    log_w = -(betas[perms] * u[None, :]).sum(axis=1)
    log_w = log_w - log_w.max()
    w = np.exp(log_w)
    w /= w.sum()
    m = perms.shape[1]
    marg = np.zeros((m, m))
    for j in range(m):
        np.add.at(marg[j], perms[:, j], w)
    return log_w - math.log(np.exp(log_w).sum()), w, marg


def _categorical(weights, u: float) -> int:
    # first index whose cumulative weight exceeds u * total
    cum = np.cumsum(weights)
    k = int(np.searchsorted(cum, u * cum[-1], side="right"))
    return min(k, len(cum) - 1)


class _RateState:
    """Event rates of all block members at the current positions."""

    __slots__ = ("parts", "grads", "nbrs", "jw", "total")


def _event_rates(model, kernel, X, Y, V, members, betas, perms, rates, jumps):
    m = len(members)
    st = _RateState()
    if m == 1:
        marg = np.ones((1, 1))
        bbar = betas
    else:
        u = np.array([model.potential(X[i], Y[i]) for i in members])
        _, _, marg = permutation_weights(u, betas, perms)
        bbar = marg @ betas
    parts = np.zeros(2 * m)
    st.grads = []
    st.nbrs = []
    st.jw = []
    for j, i in enumerate(members):
        g = model.grad_potential(X[i], Y[i])
        st.grads.append(g)
        d = float(np.dot(V[i], g))
        parts[2 * j] = rates.alpha_b * bbar[j] * d if d > 0.0 else 0.0
        if jumps:
            nbrs, w = kernel.weights_multi(model, X[i], Y[i], betas)
            if w.size and not (w.min() >= 0.0 and np.all(np.isfinite(w))):
                raise KernelError(f"kernel produced invalid weights at y={Y[i]}")
            jw = (marg[j][:, None] * w).sum(axis=0)
            st.nbrs.append(nbrs)
            st.jw.append(jw)
            parts[2 * j + 1] = rates.alpha_j * float(jw.sum())
    st.parts = parts
    st.total = float(parts.sum())
    return st


def simulate_block(model, kernel, X, Y, V, members, betas, t0, t1, rates, rng, counts,
                   debug=False, perms=None):
    """Evolve the particles ``members`` (rows of ``X, Y, V``) from ``t0`` to ``t1`` in place."""
    m = len(members)
    betas = np.asarray(betas, dtype=float)
    if perms is None:
        perms = permutation_table(m)
    scale = float(betas.max()) * rates.alpha_b
    jumps = kernel is not None and rates.alpha_j > 0.0 and model.n_states > 1
    c = m * rates.alpha_j if jumps else 0.0
    a = np.empty(m)
    b = np.empty(m)
    t = t0
    while True:
        remaining = t1 - t
        if remaining <= 0.0:
            return
        taus = [rng.standard_exponential() / rates.lambda_ref for _ in range(m)]
        r = int(np.argmin(taus))
        tau = taus[r]
        deadline = tau if tau < remaining else remaining
        elapsed = 0.0
        fired = False
        while elapsed < deadline:
            h = deadline - elapsed
            if model.horizon < h:
                h = model.horizon
            for j, i in enumerate(members):
                aj, bj = model.directional_envelope(X[i], Y[i], V[i], h)
                a[j] = scale * aj
                b[j] = scale * bj
            dt = invert_clipped_sum(a, b, c, h, rng.standard_exponential())
            if dt is None:
                for i in members:
                    X[i] += V[i] * h
                elapsed = deadline if h == deadline - elapsed else elapsed + h
                continue
            for i in members:
                X[i] += V[i] * dt
            elapsed += dt
            counts[PROPOSALS] += 1
            bound = clipped_sum_rate(a, b, c, dt)
            u = rng.random()
            st = _event_rates(model, kernel, X, Y, V, members, betas, perms, rates, jumps)
            if not math.isfinite(st.total):
                raise DivergenceError(f"non-finite event rate at t={t + elapsed}")
            if debug and st.total > bound + DOMINANCE_SLACK * (1.0 + bound):
                raise DominanceError(f"event rate {st.total} exceeds envelope {bound} at t={t + elapsed}")
            if u * bound < st.total:
                k = _categorical(st.parts, rng.random())
                j, kind = divmod(k, 2)
                i = members[j]
                if kind == 0:
                    g = st.grads[j]
                    gg = float(np.dot(g, g))
                    if gg == 0.0:
                        counts[REJECTIONS] += 1
                    else:
                        V[i] = V[i] - (2.0 * float(np.dot(V[i], g)) / gg) * g
                        counts[BOUNCES] += 1
                else:
                    n = _categorical(st.jw[j], rng.random())
                    Y[i] = st.nbrs[j][n]
                    counts[JUMPS] += 1
                fired = True
                break
            counts[REJECTIONS] += 1
        t += elapsed
        if fired:
            continue
        if tau < remaining:
            V[members[r]] = rng.standard_normal(model.dim)
            counts[REFRESHES] += 1
        else:
            return


def resample_block(model, X, Y, members, betas, perms, rng, counts):
    """Draw ``sigma ~ omega`` and move particle ``j`` into slot ``sigma(j)``."""
    u = np.array([model.potential(X[i], Y[i]) for i in members])
    _, w, _ = permutation_weights(u, betas, perms)
    p = _categorical(w, rng.random())
    sigma = perms[p]
    counts[SWAPS_PROPOSED] += 1
    if np.any(sigma != np.arange(len(members))):
        counts[SWAPS_ACCEPTED] += 1
        idx = np.asarray(members)
        xs, ys = X[idx].copy(), Y[idx].copy()
        X[idx[sigma]] = xs
        Y[idx[sigma]] = ys
    return sigma


def _check_finite(X, V, t):
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(V))):
        raise DivergenceError(f"state became non-finite before t={t}")


def run_swap_chain(model, kernel, X, Y, V, betas, partitions, t_beta, n_s, n_samples, rates, rng,
                   debug=False):
    """Infinite-swap loop over alternating partitions; returns per-slot samples.

    ``partitions`` is a sequence of partitions (lists of 0-based slot
    blocks) used cyclically, one per epoch of length ``t_beta``. A sample
    of every slot is taken after each ``n_s`` epochs.
    """
    X = np.array(X, dtype=float)
    Y = np.array(Y, dtype=np.int64)
    V = np.array(V, dtype=float)
    betas = np.asarray(betas, dtype=float)
    L, dim = X.shape
    if L == 1:
        # nothing to exchange: one epoch per sample interval
        partitions = [[[0]]]
        t_beta = n_s * t_beta
        n_s = 1
    perms = {m: permutation_table(m) for m in {len(bl) for p in partitions for bl in p}}
    xs = np.empty((n_samples, L, dim))
    ys = np.empty((n_samples, L), dtype=np.int64)
    vs = np.empty((n_samples, L, dim))
    counts = np.zeros(7, dtype=np.int64)
    epoch = 0
    for k in range(n_samples):
        for _ in range(n_s):
            t0 = epoch * t_beta
            t1 = (epoch + 1) * t_beta
            for block in partitions[epoch % len(partitions)]:
                pm = perms[len(block)]
                bb = betas[list(block)]
                simulate_block(model, kernel, X, Y, V, block, bb, t0, t1, rates, rng, counts, debug, pm)
                if len(block) > 1:
                    resample_block(model, X, Y, block, bb, pm, rng, counts)
            epoch += 1
        _check_finite(X, V, epoch * t_beta)
        xs[k] = X
        ys[k] = Y
        vs[k] = V
    return xs, ys, vs, counts


def run_finite_chain(model, kernel, X, Y, V, betas, alpha_s, dt, n_samples, rates, rngs, swap_rng,
                     debug=False):
    """Finite-rate replica exchange with adjacent swaps at rate ``alpha_s`` per pair.

    Returns raw per-replica samples and ``assign[k, slot] = replica``.
    """
    X = np.array(X, dtype=float)
    Y = np.array(Y, dtype=np.int64)
    V = np.array(V, dtype=float)
    betas = np.asarray(betas, dtype=float)
    L, dim = X.shape
    slot_of = np.arange(L)
    rep_at = np.arange(L)
    one = permutation_table(1)
    xs = np.empty((n_samples, L, dim))
    ys = np.empty((n_samples, L), dtype=np.int64)
    vs = np.empty((n_samples, L, dim))
    assign = np.empty((n_samples, L), dtype=np.int64)
    counts = np.zeros(7, dtype=np.int64)
    swap_rate = (L - 1) * alpha_s
    next_swap = swap_rng.standard_exponential() / swap_rate if swap_rate > 0 else math.inf

    def advance(t0, t1):
        for r in range(L):
            simulate_block(model, kernel, X, Y, V, [r], betas[[slot_of[r]]], t0, t1, rates, rngs[r],
                           counts, debug, one)

    t = 0.0
    for k in range(n_samples):
        ts = (k + 1) * dt
        while next_swap < ts:
            advance(t, next_swap)
            t = next_swap
            pair = min(int(swap_rng.random() * (L - 1)), L - 2)
            ra, rb = rep_at[pair], rep_at[pair + 1]
            log_g = (betas[pair] - betas[pair + 1]) * (model.potential(X[ra], Y[ra]) - model.potential(X[rb], Y[rb]))
            counts[SWAPS_PROPOSED] += 1
            if swap_rng.random() < math.exp(min(0.0, log_g)):
                rep_at[pair], rep_at[pair + 1] = rb, ra
                slot_of[ra], slot_of[rb] = pair + 1, pair
                counts[SWAPS_ACCEPTED] += 1
            next_swap = t + swap_rng.standard_exponential() / swap_rate
        advance(t, ts)
        t = ts
        _check_finite(X, V, ts)
        xs[k] = X
        ys[k] = Y
        vs[k] = V
        assign[k] = rep_at
    return xs, ys, vs, assign, counts
