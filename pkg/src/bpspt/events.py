"""First arrivals of inhomogeneous Poisson processes by thinning.

All envelopes are affine with clipping at zero, ``max(0, a + b t)`` on
``[0, horizon]``, so the integrated rate is piecewise quadratic and can be
inverted in closed form.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import DomainError, DominanceError

DOMINANCE_SLACK = 1e-9


class AffineEnvelope(NamedTuple):
    a: float
    b: float
    horizon: float

    def rate(self, t):
        return np.maximum(0.0, self.a + self.b * np.asarray(t, dtype=float))


class EventDraw(NamedTuple):
    """Outcome of one envelope inversion.

    ``arrived`` is False when the envelope mass on ``[0, horizon]`` is
    smaller than the exponential variate (``dt`` is then the horizon).
    """

    arrived: bool
    dt: float


def _solve_segment(alpha: float, beta: float, target: float) -> float:
    # smallest tau >= 0 with alpha*tau + beta*tau**2/2 = target, stable form
    disc = alpha * alpha + 2.0 * beta * target
    if disc < 0.0:
        disc = 0.0
    return 2.0 * target / (alpha + math.sqrt(disc))


def invert_clipped_sum(a, b, c: float, horizon: float, target: float) -> Optional[float]:
    """Solve ``∫_0^t [c + Σ_j max(0, a_j + b_j s)] ds = target`` for ``t``.

    Returns ``None`` when the integral over ``[0, horizon]`` falls short of
    ``target``. ``c`` must be non-negative.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    cuts = []
    for aj, bj in zip(a.tolist(), b.tolist()):
        if bj != 0.0:
            r = -aj / bj
            if 0.0 < r < horizon:
                cuts.append(r)
    cuts.sort()
    edges = [0.0] + cuts + [horizon]
    remaining = target
    for s0, s1 in zip(edges[:-1], edges[1:]):
        if s1 <= s0:
            continue
        mid = 0.5 * (s0 + s1) if math.isfinite(s1) else s0 + 1.0
        alpha = c
        slope = 0.0
        for aj, bj in zip(a.tolist(), b.tolist()):
            if aj + bj * mid > 0.0:
                alpha += aj + bj * s0
                slope += bj
        if alpha < 0.0:
            alpha = 0.0
        if alpha == 0.0 and slope == 0.0:
            continue
        length = s1 - s0
        if math.isinf(length):
            mass = math.inf
        else:
            mass = alpha * length + 0.5 * slope * length * length
        if mass >= remaining:
            return s0 + _solve_segment(alpha, slope, remaining)
        remaining -= mass
    return None


def clipped_sum_rate(a, b, c: float, t: float) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    return c + float(np.maximum(0.0, a + b * t).sum())


def invert_affine_envelope(env: AffineEnvelope, u: float) -> EventDraw:
    """First arrival under ``env`` for the uniform variate ``u``.

    The arrival time solves ``∫_0^dt max(0, a + b t) dt = -ln u``.
    """
    if not 0.0 < u < 1.0:
        raise DomainError(f"u must lie in (0, 1), got {u}")
    if not env.horizon > 0:
        raise DomainError("envelope horizon must be positive")
    dt = invert_clipped_sum([env.a], [env.b], 0.0, env.horizon, -math.log(u))
    if dt is None:
        return EventDraw(False, env.horizon)
    return EventDraw(True, dt)


class ThinningResult(NamedTuple):
    dt: float
    accepted: bool
    proposals: int
    rejections: int


def thin_next_event(
    rate: Callable[[float], float],
    envelope_at: Callable[[float, float], AffineEnvelope],
    deadline: float,
    rng: np.random.Generator,
    validate: bool = False,
) -> ThinningResult:
    """First event of the process with intensity ``rate`` before ``deadline``.

    Args:
        rate: intensity as a function of time elapsed since the call.
        envelope_at: ``(t0, max_horizon) -> AffineEnvelope`` dominating
            ``s -> rate(t0 + s)`` on ``[0, horizon]``; the horizon it
            returns may be shorter than ``max_horizon``.
        deadline: stop and report no event once this much time has elapsed.
        rng: consumes one exponential per proposal and one uniform per
            proposal landing inside its horizon.
        validate: raise :class:`DominanceError` when a proposal sees
            ``rate > envelope``.

    Returns:
        ``ThinningResult(dt, accepted, ...)``; ``dt == deadline`` and
        ``accepted`` False when nothing fired.
    """
    elapsed = 0.0
    proposals = rejections = 0
    while elapsed < deadline:
        env = envelope_at(elapsed, deadline - elapsed)
        h = min(env.horizon, deadline - elapsed)
        target = rng.standard_exponential()
        dt = invert_clipped_sum([env.a], [env.b], 0.0, h, target)
        if dt is None:
            elapsed = deadline if h >= deadline - elapsed else elapsed + h
            continue
        elapsed += dt
        proposals += 1
        bound = max(0.0, env.a + env.b * dt)
        value = rate(elapsed)
        if validate and value > bound + DOMINANCE_SLACK * (1.0 + bound):
            raise DominanceError(f"rate {value} exceeds envelope {bound} at t={elapsed}")
        if rng.random() * bound < value:
            return ThinningResult(elapsed, True, proposals, rejections)
        rejections += 1
    return ThinningResult(deadline, False, proposals, rejections)


def validate_envelope(rate: Callable[[float], float], env: AffineEnvelope, grid_points: int = 1000) -> bool:
    """True iff ``max(0, a + b t) >= rate(t) - 1e-9`` on a uniform grid of ``[0, horizon]``."""
    if grid_points < 2:
        raise DomainError("grid_points must be >= 2")
    ts = np.linspace(0.0, env.horizon, grid_points)
    bound = env.rate(ts)
    values = np.array([rate(t) for t in ts], dtype=float)
    return bool(np.all(bound >= values - DOMINANCE_SLACK))
