"""Target abstraction, particle state and elementary BPS kinematics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, ModelEvaluationError, ReflectionError


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent PCG64 stream for ``(seed, *key)``.

    Every simulator derives its streams this way, so a chain is fully
    determined by its seed.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class RateParams:
    """Bounce scale, jump scale and refresh rate."""

    alpha_b: float = 1.0
    alpha_j: float = 1.0
    lambda_ref: float = 1.0

    def __post_init__(self):
        if not self.alpha_b > 0:
            raise DomainError(f"alpha_b must be > 0, got {self.alpha_b}")
        # alpha_j == 0 switches jumps off entirely
        if not self.alpha_j >= 0:
            raise DomainError(f"alpha_j must be >= 0, got {self.alpha_j}")
        if not self.lambda_ref > 0:
            raise DomainError(f"lambda_ref must be > 0, got {self.lambda_ref}")


@dataclass
class MixedState:
    """One particle: position ``x``, discrete label ``y`` and velocity ``v``."""

    x: np.ndarray
    v: np.ndarray
    y: int = 0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(-1)
        self.v = np.asarray(self.v, dtype=float).reshape(-1)
        self.y = int(self.y)
        if self.x.shape != self.v.shape:
            raise DomainError("x and v must have equal dimension")

    def copy(self) -> "MixedState":
        return MixedState(self.x.copy(), self.v.copy(), self.y)


class TargetModel:
    """Target density ``p(x, y) ∝ exp(-U(x, y))``.

    Subclasses provide ``potential`` and ``grad_potential`` and a
    directional envelope; everything else has a generic default. The
    potential is only ever used through differences, so any additive
    constant may be dropped.

    Attributes:
        dim: dimension of the continuous part.
        n_states: size of the discrete state set (1 for continuous targets).
        horizon: default horizon of the envelopes handed to the thinning loop.
    """

    dim: int = 1
    n_states: int = 1
    horizon: float = 1.0
    name: str = "model"

    def potential(self, x: np.ndarray, y: int = 0) -> float:
        raise NotImplementedError

    def grad_potential(self, x: np.ndarray, y: int = 0) -> np.ndarray:
        raise NotImplementedError

    def neighbors(self, y: int) -> np.ndarray:
        """States reachable from ``y`` by one jump (all others by default)."""
        return np.array([s for s in range(self.n_states) if s != y], dtype=np.int64)

    def delta_potentials(self, x: np.ndarray, y: int) -> np.ndarray:
        """``U(x, y') - U(x, y)`` for every neighbor ``y'`` of ``y``."""
        u0 = self.potential(x, y)
        return np.array([self.potential(x, s) - u0 for s in self.neighbors(y)])

    def potentials_all(self, x: np.ndarray) -> np.ndarray:
        """``U(x, s)`` for every state; only sensible for small state sets."""
        return np.array([self.potential(x, s) for s in range(self.n_states)])

    def directional_envelope(self, x, y, v, horizon):
        """Affine bound ``(a, b)`` with ``a + b t >= <v, grad U(x + v t, y)>`` on ``[0, horizon]``."""
        raise NotImplementedError

    def envelope(self, x, y, v, beta, horizon=None, alpha_b=1.0):
        """Envelope dominating ``beta * lambda_b`` along ``t -> x + v t``."""
        from .events import AffineEnvelope

        h = self.horizon if horizon is None else horizon
        a, b = self.directional_envelope(x, y, v, h)
        s = beta * alpha_b
        return AffineEnvelope(s * a, s * b, h)

    def initial_state(self, rng: np.random.Generator, scale: float = 3.0) -> Optional[MixedState]:
        """Model-specific initializer; ``None`` selects the generic one."""
        return None

    def core_spec(self) -> Optional[dict]:
        """Parameters for the compiled backend, or ``None`` if unsupported."""
        return None

    def params(self) -> dict:
        return {"name": self.name, "dim": self.dim, "n_states": self.n_states}


def check_finite(value, what="potential"):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ModelEvaluationError(f"non-finite {what}: {value!r}")
    return value


def initial_state(model: TargetModel, rng: np.random.Generator, scale: float = 3.0) -> MixedState:
    """Draw a starting particle.

    Order of draws: x (``dim`` normals), y (one integer, only when the
    state set has more than one element), v (``dim`` normals).
    """
    s = model.initial_state(rng, scale)
    if s is not None:
        return s
    x = scale * rng.standard_normal(model.dim)
    y = int(rng.integers(model.n_states)) if model.n_states > 1 else 0
    v = rng.standard_normal(model.dim)
    return MixedState(x, v, y)


def bounce_rate(model: TargetModel, s: MixedState, beta: float, params: RateParams) -> float:
    """Tempered bounce rate ``beta * alpha_b * max(0, <v, grad U(x, y)>)``."""
    if not beta > 0:
        raise DomainError(f"beta must be > 0, got {beta}")
    g = check_finite(model.grad_potential(s.x, s.y), "gradient")
    return beta * params.alpha_b * max(0.0, float(np.dot(s.v, g)))


def reflect(v: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Reflect ``v`` off the hyperplane orthogonal to ``grad``."""
    v = np.asarray(v, dtype=float)
    grad = np.asarray(grad, dtype=float)
    gg = float(np.dot(grad, grad))
    if gg == 0.0:
        raise ReflectionError("cannot reflect against a zero gradient")
    return v - (2.0 * float(np.dot(v, grad)) / gg) * grad


def refresh_velocity(n: int, rng: np.random.Generator) -> np.ndarray:
    """Fresh velocity with i.i.d. standard normal coordinates."""
    if n < 1:
        raise DomainError("dimension must be >= 1")
    return rng.standard_normal(n)


def potential_difference(model: TargetModel, s1, s2) -> float:
    """``U(s1) - U(s2)`` for two ``(x, y)`` pairs."""
    u1 = check_finite(model.potential(np.asarray(s1[0], dtype=float), int(s1[1])))
    u2 = check_finite(model.potential(np.asarray(s2[0], dtype=float), int(s2[1])))
    return float(u1 - u2)


@dataclass
class EventCounters:
    proposals: int = 0
    rejections: int = 0
    bounces: int = 0
    jumps: int = 0
    refreshes: int = 0
    swaps_proposed: int = 0
    swaps_accepted: int = 0
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {
            "proposals": self.proposals,
            "rejections": self.rejections,
            "bounces": self.bounces,
            "jumps": self.jumps,
            "refreshes": self.refreshes,
            "swaps_proposed": self.swaps_proposed,
            "swaps_accepted": self.swaps_accepted,
        }
        d.update(self.extra)
        return d

    @classmethod
    def from_array(cls, arr) -> "EventCounters":
        a = [int(v) for v in arr]
        return cls(*a[:7])

    def to_array(self) -> np.ndarray:
        return np.array(
            [self.proposals, self.rejections, self.bounces, self.jumps,
             self.refreshes, self.swaps_proposed, self.swaps_accepted],
            dtype=np.int64,
        )
