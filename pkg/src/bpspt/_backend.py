"""Dispatch between the compiled core and the pure-Python engine.

The compiled core is used when it imported and both the target and the
kernel expose a core description. Set ``BPSPT_BACKEND=python`` to force
the reference engine everywhere.
"""

from __future__ import annotations

import os

from . import engine
from .errors import ConfigError

try:
    from . import _core
except ImportError:  # pragma: no cover - depends on the build
    _core = None

HAVE_CORE = _core is not None
BACKENDS = ("auto", "compiled", "python")


def default_backend() -> str:
    env = os.environ.get("BPSPT_BACKEND", "auto").strip().lower()
    if env not in BACKENDS:
        raise ConfigError([f"BPSPT_BACKEND must be one of {BACKENDS}, got {env!r}"])
    return env


def _kernel_kind(kernel, model, rates):
    if kernel is None or rates.alpha_j == 0 or model.n_states <= 1:
        return 0
    return getattr(kernel, "core_kind", None)


def resolve(model, kernel, rates, backend=None) -> tuple[str, dict | None, int | None]:
    """Return ``(name, core_spec, kernel_kind)`` of the backend to use."""
    backend = (backend or default_backend()).lower()
    if backend not in BACKENDS:
        raise ConfigError([f"backend must be one of {BACKENDS}, got {backend!r}"])
    spec = model.core_spec()
    kind = _kernel_kind(kernel, model, rates)
    usable = HAVE_CORE and spec is not None and kind is not None
    if backend == "compiled" and not usable:
        why = "extension not built" if not HAVE_CORE else "target or kernel has no compiled form"
        raise ConfigError([f"compiled backend unavailable: {why}"])
    if backend == "python" or not usable:
        return "python", None, None
    return "compiled", spec, kind


def swap_chain(model, kernel, X, Y, V, betas, partitions, t_beta, n_s, n_samples, rates, rng,
               debug=False, backend=None):
    name, spec, kind = resolve(model, kernel, rates, backend)
    if name == "compiled":
        out = _core.swap_chain(spec, kind, X, Y, V, betas, [list(map(list, p)) for p in partitions],
                               float(t_beta), int(n_s), int(n_samples), rates.alpha_b, rates.alpha_j,
                               rates.lambda_ref, rng, bool(debug))
    else:
        out = engine.run_swap_chain(model, kernel, X, Y, V, betas, partitions, t_beta, n_s, n_samples,
                                    rates, rng, debug)
    return name, out


def finite_chain(model, kernel, X, Y, V, betas, alpha_s, dt, n_samples, rates, rngs, swap_rng,
                 debug=False, backend=None):
    name, spec, kind = resolve(model, kernel, rates, backend)
    if name == "compiled":
        out = _core.finite_chain(spec, kind, X, Y, V, betas, float(alpha_s), float(dt), int(n_samples),
                                 rates.alpha_b, rates.alpha_j, rates.lambda_ref, list(rngs), swap_rng,
                                 bool(debug))
    else:
        out = engine.run_finite_chain(model, kernel, X, Y, V, betas, alpha_s, dt, n_samples, rates, rngs,
                                      swap_rng, debug)
    return name, out
