"""Single-temperature BPS for continuous and mixed continuous-discrete targets."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import _backend
from .core import EventCounters, MixedState, RateParams, initial_state, make_rng
from .errors import ConfigError, DataError, DomainError


@dataclass(frozen=True)
class BpsConfig:
    """Run length, rates and seed of one chain.

    Samples are taken at ``t = k * sample_interval`` for ``k = 1..num_samples``.
    """

    sample_interval: float = 1.0
    num_samples: int = 1000
    rates: RateParams = field(default_factory=RateParams)
    seed: int = 0
    debug: bool = False
    init_scale: float = 3.0
    record_velocity: bool = True

    def __post_init__(self):
        errs = []
        if not self.sample_interval > 0:
            errs.append(f"sample_interval must be > 0, got {self.sample_interval}")
        if not (isinstance(self.num_samples, (int, np.integer)) and self.num_samples >= 1):
            errs.append(f"num_samples must be an integer >= 1, got {self.num_samples}")
        if not 0 <= int(self.seed) < 2**64:
            errs.append(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if not self.init_scale > 0:
            errs.append(f"init_scale must be > 0, got {self.init_scale}")
        if errs:
            raise ConfigError(errs)


@dataclass
class SampleTrace:
    """Samples of one ladder slot (or of a single-temperature chain)."""

    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    v: Optional[np.ndarray] = None
    counters: EventCounters = field(default_factory=EventCounters)
    beta: float = 1.0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def columns(self) -> list:
        cols = ["t"] + [f"x_{i + 1}" for i in range(self.dim)] + ["y"]
        if self.v is not None:
            cols += [f"v_{i + 1}" for i in range(self.dim)]
        return cols

    def to_csv(self, path) -> Path:
        """Write with a header row; floats use the shortest round-trip repr."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns())
            for k in range(len(self)):
                row = [repr(float(self.times[k]))]
                row += [repr(float(z)) for z in self.x[k]]
                row.append(str(int(self.y[k])))
                if self.v is not None:
                    row += [repr(float(z)) for z in self.v[k]]
                w.writerow(row)
        return path

    @classmethod
    def from_csv(cls, path, beta: float = 1.0) -> "SampleTrace":
        path = Path(path)
        with path.open(newline="") as fh:
            r = csv.reader(fh)
            try:
                header = next(r)
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            rows = list(r)
        if not header or header[0] != "t" or "y" not in header:
            raise DataError(f"{path}: expected columns t, x_1..x_n, y[, v_1..v_n]")
        iy = header.index("y")
        dim = iy - 1
        if header[1:iy] != [f"x_{i + 1}" for i in range(dim)] or dim < 1:
            raise DataError(f"{path}: malformed position columns")
        has_v = len(header) > iy + 1
        if has_v and header[iy + 1:] != [f"v_{i + 1}" for i in range(dim)]:
            raise DataError(f"{path}: malformed velocity columns")
        if not rows:
            raise DataError(f"{path}: no samples")
        try:
            arr = np.array([[float(z) for z in row] for row in rows])
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from None
        if arr.shape[1] != len(header):
            raise DataError(f"{path}: ragged rows")
        return cls(arr[:, 0], arr[:, 1:iy], arr[:, iy].astype(np.int64),
                   arr[:, iy + 1:] if has_v else None, beta=beta)

    def summary(self) -> dict:
        return {"num_samples": len(self), "dim": self.dim, "beta": self.beta,
                "counters": self.counters.as_dict(), **self.meta}


def _trace_from(xs, ys, vs, slot, dt, counters, beta, record_v, meta):
    n = xs.shape[0]
    times = dt * np.arange(1, n + 1)
    return SampleTrace(times, xs[:, slot].copy(), ys[:, slot].copy(),
                       vs[:, slot].copy() if record_v else None, counters, beta, dict(meta))


def _run_single(model, kernel, cfg: BpsConfig, initial, backend):
    rng = make_rng(cfg.seed, 0)
    s = initial.copy() if initial is not None else initial_state(model, rng, cfg.init_scale)
    if s.x.shape != (model.dim,):
        raise DomainError(f"initial state has dimension {s.x.shape}, model has {model.dim}")
    t0 = time.perf_counter()
    name, (xs, ys, vs, counts) = _backend.swap_chain(
        model, kernel, s.x[None, :], [s.y], s.v[None, :], [1.0], [[[0]]], cfg.sample_interval, 1,
        cfg.num_samples, cfg.rates, rng, cfg.debug, backend)
    wall = time.perf_counter() - t0
    meta = {"backend": name, "wall_time": wall, "seed": int(cfg.seed)}
    return _trace_from(xs, ys, vs, 0, cfg.sample_interval, EventCounters.from_array(counts), 1.0,
                       cfg.record_velocity, meta)


def run_bps_continuous(model, cfg: BpsConfig, initial: Optional[MixedState] = None,
                       backend: Optional[str] = None) -> SampleTrace:
    """BPS on a target without a discrete part.

    Bounces compete with refreshes at rate ``lambda_ref``; each refresh
    redraws the whole velocity.
    """
    if model.n_states != 1:
        raise DomainError("run_bps_continuous needs a target with a single discrete state")
    return _run_single(model, None, cfg, initial, backend)


def run_bps_mixed(model, kernel, cfg: BpsConfig, initial: Optional[MixedState] = None,
                  backend: Optional[str] = None) -> SampleTrace:
    """BPS with label jumps at rate ``alpha_j * w(y' | x, y)``.

    Accepted events are split into bounce or jump in proportion to their
    rates; a jump picks ``y'`` from the normalized weights.
    """
    if model.n_states < 2:
        raise DomainError("run_bps_mixed needs at least two discrete states")
    return _run_single(model, kernel, cfg, initial, backend)


def write_summary(path, trace_or_traces, config: dict, extra: Optional[dict] = None) -> Path:
    """JSON run summary: config echo, counters and wall time."""
    traces = trace_or_traces if isinstance(trace_or_traces, (list, tuple)) else [trace_or_traces]
    doc = {"config": config, "traces": [t.summary() for t in traces]}
    if extra:
        doc.update(extra)
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default))
    return path


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "__dataclass_fields__"):
        return asdict(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")
