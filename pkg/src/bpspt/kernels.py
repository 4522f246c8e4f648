"""Transition weights ``w(y' | x, y)`` for the discrete coordinate.

Both kernels are balanced with respect to ``p(x, .)**beta`` for every
``beta``; the jump rate of a move is ``alpha_j * w``.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, KernelError

MAX_ENUMERABLE_STATES = 64
# relative weights below exp(LOG_WEIGHT_FLOOR) are raised to it
LOG_WEIGHT_FLOOR = -700.0


def mh_uniform_kernel(model, x, y: int, y_new: int, beta: float) -> float:
    """Metropolis weight for a uniformly proposed neighbor.

    ``(1 / |N(y)|) * min(1, exp(-beta * (U(x, y') - U(x, y))))``.
    """
    nbrs = model.neighbors(y)
    hits = np.flatnonzero(nbrs == y_new)
    if hits.size == 0:
        raise DomainError(f"{y_new} is not a neighbor of {y}")
    du = model.potential(x, y_new) - model.potential(x, y)
    return min(1.0, float(np.exp(-beta * du))) / len(nbrs)


def suwa_todo_row_from_logp(logp: np.ndarray, y: int) -> np.ndarray:
    """Suwa-Todo transition row out of ``y`` for unnormalized log-weights ``logp``.

    States are ordered by decreasing weight ``w_1 >= w_2 >= ...``, ties
    broken by index. The flow from sorted state i to sorted state j is
    ``max(0, min(D_ij, w_i + w_j - D_ij, w_i, w_j))`` with
    ``D_ij = S_i - S_{j-1} + w_1`` and ``S_0 = S_K``.

    ``D_ij`` and ``w_i + w_j - D_ij`` are expanded into sums over contiguous
    runs of weights, so the terms that cancel exactly are never formed and
    the row of a light state keeps full relative precision.
    """
    logp = np.asarray(logp, dtype=float)
    k = logp.size
    w = np.exp(np.maximum(logp - logp.max(), LOG_WEIGHT_FLOOR))
    order = sorted(range(k), key=lambda s: (-w[s], s))
    ws = [float(v) for v in w[order]]
    p = order.index(y)
    wp, w1 = ws[p], ws[0]
    flow = [0.0] * k
    # j = 1 wraps around: D = w_1 - Σ_{q>i} w_q, E = w_i + Σ_{q>i} w_q
    tail = 0.0
    for q in range(p + 1, k):
        tail += ws[q]
    flow[0] = (w1 - tail, wp + tail)
    # 1 < j <= i: D = w_1 + Σ_{j<=q<=i} w_q, E = -(w_1 + Σ_{j<q<i} w_q)
    acc = 0.0
    for j in range(p, 0, -1):
        if j == p:
            flow[j] = (w1 + wp, wp - w1)
        else:
            flow[j] = (w1 + (ws[j] + acc + wp), -(w1 + acc))
            acc += ws[j]
    # j > i: D = w_1 - Σ_{i<q<j} w_q, E = Σ_{i<=q<=j} w_q - w_1
    inner = 0.0
    for j in range(p + 1, k):
        flow[j] = (w1 - inner, (wp + inner + ws[j]) - w1)
        inner += ws[j]
    row = np.empty(k)
    for j in range(k):
        d, e = flow[j]
        v = min(d, e, wp, ws[j])
        row[order[j]] = (v if v > 0.0 else 0.0) / wp
    return row


def suwa_todo_kernel(model, x, y: int, beta: float) -> np.ndarray:
    """Full Suwa-Todo row ``w(. | x, y)`` over the state set, self-transition included."""
    if model.n_states > MAX_ENUMERABLE_STATES:
        raise DomainError(f"{model.n_states} states is too many to enumerate")
    return suwa_todo_row_from_logp(-beta * model.potentials_all(x), y)


class DiscreteKernel:
    """Weights of the moves out of ``y``, excluding ``y`` itself."""

    name = "kernel"
    core_kind = None

    def weights(self, model, x, y: int, beta: float):
        """Return ``(neighbors, w)`` arrays."""
        raise NotImplementedError

    def weights_multi(self, model, x, y: int, betas):
        """Neighbors and a ``(len(betas), n_neighbors)`` weight table."""
        rows = [self.weights(model, x, y, b) for b in betas]
        return rows[0][0], np.array([r[1] for r in rows])


class MHUniformKernel(DiscreteKernel):
    name = "mh-uniform"
    core_kind = 1

    def weights(self, model, x, y, beta):
        nbrs = model.neighbors(y)
        du = model.delta_potentials(x, y)
        w = np.minimum(1.0, np.exp(-beta * du)) / len(nbrs)
        return nbrs, w

    def weights_multi(self, model, x, y, betas):
        nbrs = model.neighbors(y)
        du = model.delta_potentials(x, y)
        w = np.minimum(1.0, np.exp(-np.asarray(betas, dtype=float)[:, None] * du[None, :])) / len(nbrs)
        return nbrs, w


class SuwaTodoKernel(DiscreteKernel):
    name = "suwa-todo"
    core_kind = 2

    def weights(self, model, x, y, beta):
        if model.n_states > MAX_ENUMERABLE_STATES:
            raise DomainError(f"{model.n_states} states is too many to enumerate")
        row = suwa_todo_row_from_logp(-beta * model.potentials_all(x), y)
        nbrs = np.array([s for s in range(model.n_states) if s != y], dtype=np.int64)
        return nbrs, row[nbrs]

    def weights_multi(self, model, x, y, betas):
        if model.n_states > MAX_ENUMERABLE_STATES:
            raise DomainError(f"{model.n_states} states is too many to enumerate")
        u = model.potentials_all(x)
        nbrs = np.array([s for s in range(model.n_states) if s != y], dtype=np.int64)
        w = np.array([suwa_todo_row_from_logp(-b * u, y)[nbrs] for b in betas])
        return nbrs, w


KERNELS = {"mh-uniform": MHUniformKernel, "suwa-todo": SuwaTodoKernel}


def get_kernel(name: str) -> DiscreteKernel:
    try:
        return KERNELS[name]()
    except KeyError:
        raise DomainError(f"unknown kernel {name!r}; choose from {sorted(KERNELS)}") from None


def check_weights(w):
    w = np.asarray(w, dtype=float)
    if np.any(w < 0) or np.any(~np.isfinite(w)):
        raise KernelError(f"kernel produced invalid weights {w}")
    return w
