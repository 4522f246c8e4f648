"""Built-in benchmark targets and their exact samplers."""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate

from .core import MixedState, TargetModel
from .errors import ConfigError, DomainError

CORE_GAUSSIAN, CORE_MIXTURE, CORE_NEAL, CORE_BIMODAL = 0, 1, 2, 3


def _softplus(z: float) -> float:
    return z + math.log1p(math.exp(-z)) if z > 0 else math.log1p(math.exp(z))


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


class IsotropicGaussian(TargetModel):
    """``N(mean, scale**2 I)`` with no discrete part."""

    name = "gaussian"

    def __init__(self, dim: int = 1, mean=None, scale: float = 1.0, horizon: float = 1.0):
        self.dim = int(dim)
        self.n_states = 1
        self.mean = np.zeros(self.dim) if mean is None else np.asarray(mean, dtype=float).reshape(self.dim)
        self.scale = float(scale)
        self.horizon = float(horizon)
        self._inv_var = 1.0 / self.scale**2

    def potential(self, x, y=0):
        d = np.asarray(x, dtype=float) - self.mean
        return 0.5 * self._inv_var * float(d @ d)

    def grad_potential(self, x, y=0):
        return self._inv_var * (np.asarray(x, dtype=float) - self.mean)

    def directional_envelope(self, x, y, v, horizon):
        # exact: <v, grad U(x + v t)> is affine in t
        return self._inv_var * float(np.dot(v, x - self.mean)), self._inv_var * float(np.dot(v, v))

    def sample(self, rng, n: int):
        x = self.mean + self.scale * rng.standard_normal((n, self.dim))
        return x, np.zeros(n, dtype=np.int64)

    def core_spec(self):
        return {"kind": CORE_GAUSSIAN, "dim": self.dim, "n_states": 1, "horizon": self.horizon,
                "vec": self.mean.copy(), "vec2": np.zeros(1), "s0": self._inv_var, "s1": 0.0, "nbits": 0}

    def params(self):
        return {"name": self.name, "dim": self.dim, "mean": self.mean.tolist(), "scale": self.scale}


class GaussianMixtureModel(TargetModel):
    """Mixture with the cluster label as the discrete coordinate.

    ``U(x, y) = -ln pi_y + |x - mu_y|^2 / (2 variance)``.
    """

    name = "mixture"
    discrete_metric = "kld"

    def __init__(self, weights, centers, variance: float, horizon: float = 1.0, name: str | None = None):
        self.weights = np.asarray(weights, dtype=float)
        self.centers = np.asarray(centers, dtype=float)
        if self.centers.ndim != 2 or self.centers.shape[0] != self.weights.size:
            raise DomainError("centers must be (n_states, dim)")
        if abs(self.weights.sum() - 1.0) > 1e-12 or np.any(self.weights <= 0):
            raise DomainError("weights must be positive and sum to 1")
        self.n_states, self.dim = self.centers.shape
        self.variance = float(variance)
        self._inv_var = 1.0 / self.variance
        self.horizon = float(horizon)
        self._neg_log_w = -np.log(self.weights)
        if name:
            self.name = name

    def _check(self, y):
        if not 0 <= y < self.n_states:
            raise DomainError(f"invalid cluster {y}")

    def potential(self, x, y=0):
        self._check(y)
        d = np.asarray(x, dtype=float) - self.centers[y]
        return self._neg_log_w[y] + float(d @ d) * self._inv_var / 2.0

    def grad_potential(self, x, y=0):
        self._check(y)
        return (np.asarray(x, dtype=float) - self.centers[y]) * self._inv_var

    def potentials_all(self, x):
        d = np.asarray(x, dtype=float)[None, :] - self.centers
        return self._neg_log_w + np.einsum("ij,ij->i", d, d) * self._inv_var / 2.0

    def delta_potentials(self, x, y):
        u = self.potentials_all(x)
        return np.delete(u, y) - u[y]

    def directional_envelope(self, x, y, v, horizon):
        # exact: tight envelope, no thinning rejections
        return (float(np.dot(v, x - self.centers[y])) * self._inv_var,
                float(np.dot(v, v)) * self._inv_var)

    def sample(self, rng, n: int):
        y = rng.choice(self.n_states, size=n, p=self.weights)
        x = self.centers[y] + math.sqrt(self.variance) * rng.standard_normal((n, self.dim))
        return x, y.astype(np.int64)

    def discrete_truth(self):
        return self.weights.copy()

    def core_spec(self):
        return {"kind": CORE_MIXTURE, "dim": self.dim, "n_states": self.n_states, "horizon": self.horizon,
                "vec": np.ascontiguousarray(self.centers.ravel()), "vec2": self._neg_log_w.copy(),
                "s0": self._inv_var, "s1": 0.0, "nbits": 0}

    def params(self):
        return {"name": self.name, "dim": self.dim, "n_states": self.n_states,
                "weights": self.weights.tolist(), "variance": self.variance}


GMM24_WEIGHTS = (0.15, 0.3, 0.3, 0.25)
GMM24_VALUES = (-2.0, 0.0, 2.0, 4.0)
GMM24_VARIANCE = 3.0


def gmm24_centers() -> np.ndarray:
    """Centers in R^24: coordinate d of center k is entry k of the d-th permutation.

    Permutations of (-2, 0, 2, 4) are taken in lexicographic order.
    """
    perms = list(itertools.permutations(GMM24_VALUES))
    return np.array(perms, dtype=float).T.copy()


def gmm24(horizon: float = 1.0) -> GaussianMixtureModel:
    return GaussianMixtureModel(GMM24_WEIGHTS, gmm24_centers(), GMM24_VARIANCE, horizon=horizon, name="gmm24")


def random_mixture(n_states: int = 8, dim: int = 2, seed: int = 0, spread: float = 3.0,
                   variance: float = 1.0) -> GaussianMixtureModel:
    """Small synthetic mixture used by balance checks."""
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(n_states))
    centers = spread * rng.standard_normal((n_states, dim))
    return GaussianMixtureModel(w / w.sum(), centers, variance, name=f"mixture{n_states}")


class NealModel(TargetModel):
    """Two continuous coordinates and ``n_bits`` Bernoulli labels.

    ``x1 ~ N(0, 1)``, ``x2 | x1 ~ N(x1, sd**2)``,
    ``y_i | x1 ~ Bernoulli(1 / (1 + e^{x1}))``. The labels are packed into
    one integer, bit ``i`` holding ``y_{i+1}``.
    """

    name = "neal"
    discrete_metric = "mse"

    def __init__(self, n_bits: int = 20, sd: float = 0.04, horizon: float = 1.0):
        if not 1 <= n_bits <= 62:
            raise DomainError("n_bits must be in [1, 62]")
        self.n_bits = int(n_bits)
        self.sd = float(sd)
        self.dim = 2
        self.n_states = 1 << self.n_bits
        self.horizon = float(horizon)
        self._inv_sd2 = 1.0 / self.sd**2
        self._flips = np.array([1 << k for k in range(self.n_bits)], dtype=np.int64)

    def _zeros(self, y: int) -> int:
        if not 0 <= y < self.n_states:
            raise DomainError(f"invalid label vector {y}")
        return self.n_bits - bin(y).count("1")

    def bits(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.int64)
        return ((y[..., None] >> np.arange(self.n_bits)) & 1).astype(np.int8)

    def potential(self, x, y=0):
        x1, x2 = float(x[0]), float(x[1])
        n0 = self._zeros(y)
        return (0.5 * x1 * x1 + 0.5 * (x2 - x1) ** 2 * self._inv_sd2
                + self.n_bits * _softplus(x1) - n0 * x1)

    def grad_potential(self, x, y=0):
        x1, x2 = float(x[0]), float(x[1])
        n0 = self._zeros(y)
        r = (x2 - x1) * self._inv_sd2
        return np.array([x1 - r + self.n_bits * _sigmoid(x1) - n0, r])

    def neighbors(self, y):
        return np.bitwise_xor(np.int64(y), self._flips)

    def delta_potentials(self, x, y):
        # flipping a 0 bit removes a -x1 term, flipping a 1 bit adds it
        x1 = float(x[0])
        b = (np.int64(y) >> np.arange(self.n_bits)) & 1
        return np.where(b == 0, x1, -x1)

    def potentials_all(self, x):
        raise DomainError("state set is too large to enumerate")

    def directional_envelope(self, x, y, v, horizon):
        # logistic term bounded by theta(v1) * v1 * n_bits; valid for every t
        x1, x2 = float(x[0]), float(x[1])
        v1, v2 = float(v[0]), float(v[1])
        n0 = self._zeros(y)
        dv = v2 - v1
        a = x1 * v1 + (x2 - x1) * dv * self._inv_sd2 - v1 * n0 + max(0.0, v1) * self.n_bits
        b = dv * dv * self._inv_sd2 + v1 * v1
        return a, b

    def sample(self, rng, n: int):
        x1 = rng.standard_normal(n)
        x2 = x1 + self.sd * rng.standard_normal(n)
        p1 = 1.0 / (1.0 + np.exp(x1))
        bits = rng.random((n, self.n_bits)) < p1[:, None]
        y = (bits.astype(np.int64) << np.arange(self.n_bits)).sum(axis=1)
        return np.column_stack([x1, x2]), y

    def discrete_truth(self):
        return np.full(self.n_bits, 0.5)

    def discrete_features(self, ys) -> np.ndarray:
        return self.bits(ys)

    def core_spec(self):
        return {"kind": CORE_NEAL, "dim": 2, "n_states": 0, "horizon": self.horizon,
                "vec": np.zeros(1), "vec2": np.zeros(1), "s0": self._inv_sd2, "s1": 0.0,
                "nbits": self.n_bits}

    def params(self):
        return {"name": self.name, "dim": 2, "n_bits": self.n_bits, "sd": self.sd}


class Bimodal1D(TargetModel):
    """``U(x) = (x^2 - a^2)^2 / (4 s)``: wells at ``±a``."""

    name = "bimodal1d"

    def __init__(self, a: float = 2.0, s: float = 1.0, horizon: float = 0.5):
        self.a = float(a)
        self.s = float(s)
        self.dim = 1
        self.n_states = 1
        self.horizon = float(horizon)
        self._rejection = None

    def potential(self, x, y=0):
        z = float(np.asarray(x).reshape(-1)[0])
        return (z * z - self.a**2) ** 2 / (4.0 * self.s)

    def grad_potential(self, x, y=0):
        z = float(np.asarray(x).reshape(-1)[0])
        return np.array([z * (z * z - self.a**2) / self.s])

    def _dir(self, z, v, t):
        q = z + v * t
        return v * q * (q * q - self.a**2) / self.s

    def directional_envelope(self, x, y, v, horizon):
        # constant envelope at the maximum of the cubic on [0, horizon]
        z = float(np.asarray(x).reshape(-1)[0])
        w = float(np.asarray(v).reshape(-1)[0])
        ts = [0.0, horizon]
        if w != 0.0:
            c = self.a / math.sqrt(3.0)
            for q in (c, -c):
                t = (q - z) / w
                if 0.0 < t < horizon:
                    ts.append(t)
        return max(0.0, max(self._dir(z, w, t) for t in ts)), 0.0

    def _proposal(self):
        if self._rejection is None:
            def log_target(z):
                return -((z * z - self.a**2) ** 2) / (4.0 * self.s)

            lim = self.a + 12.0 * math.sqrt(self.s) + 5.0
            z_norm, _ = integrate.quad(lambda z: math.exp(log_target(z)), -lim, lim, limit=200)
            best = None
            for sig in np.linspace(0.3, 3.0, 28) * math.sqrt(self.a**2 + self.s):
                # sup of log_target + z^2/(2 sig^2) at z = 0 or z^2 = a^2 + s/sig^2
                cands = [0.0, math.sqrt(self.a**2 + self.s / sig**2)]
                log_m = max(log_target(z) + z * z / (2 * sig**2) for z in cands)
                eff = z_norm / (math.exp(log_m) * math.sqrt(2 * math.pi) * sig)
                if best is None or eff > best[0]:
                    best = (eff, sig, log_m)
            self._rejection = best
        return self._rejection

    def sample(self, rng, n: int, min_efficiency: float = 0.01):
        eff, sig, log_m = self._proposal()
        if eff < min_efficiency:
            raise ConfigError(f"rejection sampler efficiency {eff:.3g} below {min_efficiency}")
        out = np.empty(0)
        while out.size < n:
            m = int(1.2 * (n - out.size) / eff) + 16
            z = sig * rng.standard_normal(m)
            log_acc = (-((z * z - self.a**2) ** 2) / (4.0 * self.s) + z * z / (2 * sig**2) - log_m)
            keep = z[np.log(rng.random(m)) < log_acc]
            out = np.concatenate([out, keep])
        return out[:n, None], np.zeros(n, dtype=np.int64)

    def core_spec(self):
        return {"kind": CORE_BIMODAL, "dim": 1, "n_states": 1, "horizon": self.horizon,
                "vec": np.array([self.a]), "vec2": np.zeros(1), "s0": self.a**2, "s1": self.s, "nbits": 0}

    def params(self):
        return {"name": self.name, "a": self.a, "s": self.s}


def exact_sampler(model, rng, n: int):
    """``n`` i.i.d. draws ``(x, y)`` from ``model``."""
    if not hasattr(model, "sample"):
        raise DomainError(f"no exact sampler for {type(model).__name__}")
    return model.sample(rng, n)


def exact_states(model, rng, n: int):
    """Exact draws as :class:`MixedState` objects with standard normal velocities."""
    x, y = exact_sampler(model, rng, n)
    v = rng.standard_normal(x.shape)
    return [MixedState(x[i], v[i], int(y[i])) for i in range(n)]


MODELS = {
    "gmm24": gmm24,
    "neal": NealModel,
    "bimodal1d": Bimodal1D,
    "gaussian": IsotropicGaussian,
}


def build_model(name: str, **params) -> TargetModel:
    try:
        factory = MODELS[name]
    except KeyError:
        raise DomainError(f"unknown target {name!r}; choose from {sorted(MODELS)}") from None
    return factory(**params)
