"""Run configuration, experiment presets and multi-chain orchestration."""

from __future__ import annotations

import copy
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .bps import BpsConfig, SampleTrace, run_bps_continuous, run_bps_mixed
from .core import RateParams, make_rng
from .diagnostics import DiagnosticsReport, diagnose_chains, ks_trend_slope, prefix_ks_curve
from .errors import ConfigError, DataError, DivergenceError, DomainError
from .kernels import KERNELS, get_kernel
from .models import MODELS, build_model
from .tempering import Ladder, PartitionPair, run_bpspt_finite, run_bpspt_infinite

SAMPLERS = ("bps", "bps-mixed", "bpspt-finite", "bpspt-infinite")
PT_SAMPLERS = ("bpspt-finite", "bpspt-infinite")
REFERENCE_STREAM = 2**31 - 1


def _ladder(n: int, step: float) -> list:
    return [round(1.0 - step * i, 12) for i in range(n)]


def _gmm(**kw):
    base = {
        "target": "gmm24", "kernel": "suwa-todo",
        "rates": {"alpha_b": 1.0, "alpha_j": 4.0, "lambda_ref": 1.0},
        "num_samples": 100_000, "num_chains": 10, "seed": 20230401,
    }
    base.update(kw)
    return base


def _neal(**kw):
    base = {
        "target": "neal", "kernel": "mh-uniform",
        "rates": {"alpha_b": 1.0, "alpha_j": 20.0, "lambda_ref": 0.1},
        "num_samples": 30_000, "num_chains": 10, "seed": 20230402,
    }
    base.update(kw)
    return base


_GMM_PT = {
    "sampler": "bpspt-infinite", "betas": _ladder(10, 0.1),
    "partition": {"A": [[1, 2, 3, 4], [5, 6, 7, 8], [9, 10]], "B": [[1, 2], [3, 4, 5, 6], [7, 8, 9, 10]]},
    "t_beta": 0.1, "n_s": 10,
}
_NEAL_PT = {
    "sampler": "bpspt-infinite", "betas": _ladder(5, 0.2),
    "partition": {"A": [[1, 2, 3], [4, 5]], "B": [[1, 2], [3, 4, 5]]},
    "t_beta": 0.1, "n_s": 10,
}
_BIMODAL = {
    "target": "bimodal1d", "target_params": {"a": 2.0, "s": 1.0},
    "rates": {"alpha_b": 1.0, "alpha_j": 0.0, "lambda_ref": 1.0},
    "num_samples": 10_000, "num_chains": 1, "seed": 7,
}

PRESETS = {
    "gmm24-paper": _gmm(**_GMM_PT),
    "gmm24-bps-paper": _gmm(sampler="bps-mixed", sample_interval=1.0),
    "neal-paper": _neal(**_NEAL_PT),
    "neal-bps-paper": _neal(sampler="bps-mixed", sample_interval=1.0),
    "bimodal1d-infinite": dict(_BIMODAL, sampler="bpspt-infinite", betas=[1.0, 0.5, 0.1],
                               partition={"A": [[1, 2], [3]], "B": [[1], [2, 3]]}, t_beta=0.5, n_s=10),
    "bimodal1d-finite": dict(_BIMODAL, sampler="bpspt-finite", betas=[1.0, 0.5, 0.1], alpha_s=1.0,
                             sample_interval=5.0),
    "bimodal1d-bps": dict(_BIMODAL, sampler="bps", sample_interval=5.0),
}
# desk variants: ten times fewer samples
for _name in ("gmm24-paper", "gmm24-bps-paper", "neal-paper", "neal-bps-paper"):
    _desk = copy.deepcopy(PRESETS[_name])
    _desk["num_samples"] //= 10
    PRESETS[_name.replace("-paper", "-desk")] = _desk
PRESET_NOTES = {
    "gmm24-paper": "24-d 4-component mixture, infinite-swap BPS-PT, 1e5 samples x 10 chains",
    "gmm24-bps-paper": "24-d mixture, plain mixed BPS baseline",
    "neal-paper": "Neal's 2-d + 20-bit model, infinite-swap BPS-PT, 3e4 samples x 10 chains",
    "neal-bps-paper": "Neal's model, plain mixed BPS baseline",
    "gmm24-desk": "gmm24-paper with 1e4 samples",
    "gmm24-bps-desk": "gmm24-bps-paper with 1e4 samples",
    "neal-desk": "neal-paper with 3e3 samples",
    "neal-bps-desk": "neal-bps-paper with 3e3 samples",
    "bimodal1d-infinite": "1-d double well, ladder (1, 0.5, 0.1), infinite swapping",
    "bimodal1d-finite": "1-d double well, ladder (1, 0.5, 0.1), exchange rate 1",
    "bimodal1d-bps": "1-d double well, plain BPS",
}


@dataclass
class RunConfig:
    """Everything needed to reproduce a batch of chains."""

    target: str
    sampler: str
    target_params: dict = field(default_factory=dict)
    kernel: Optional[str] = None
    rates: RateParams = field(default_factory=RateParams)
    betas: Optional[list] = None
    partition: Optional[dict] = None
    t_beta: Optional[float] = None
    n_s: Optional[int] = None
    alpha_s: Optional[float] = None
    sample_interval: Optional[float] = None
    num_samples: int = 1000
    num_chains: int = 1
    seed: int = 0
    init_scale: float = 3.0
    record_velocity: bool = True
    debug: bool = False
    backend: Optional[str] = None
    output: Optional[str] = None
    reference_size: Optional[int] = None

    def model(self):
        return build_model(self.target, **self.target_params)

    def kernel_obj(self):
        return get_kernel(self.kernel) if self.kernel else None

    def ladder(self) -> Optional[Ladder]:
        return Ladder(self.betas) if self.betas is not None else None

    def partition_pair(self) -> Optional[PartitionPair]:
        if self.partition is None:
            return None
        return PartitionPair.from_one_based(self.partition["A"], self.partition["B"], self.t_beta, self.n_s,
                                            L=len(self.betas))

    def interval(self) -> float:
        if self.sampler == "bpspt-infinite":
            return self.n_s * self.t_beta
        return self.sample_interval

    def bps_config(self, seed: int) -> BpsConfig:
        return BpsConfig(self.interval(), self.num_samples, self.rates, seed, self.debug, self.init_scale,
                         self.record_velocity)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rates"] = asdict(self.rates)
        return d


_KEYS = {f.name for f in fields(RunConfig)} | {"preset"}


def _check_number(errs, d, key, kind, lo=None, strict_lo=False, required=False):
    if key not in d or d[key] is None:
        if required:
            errs.append(f"{key} is required")
        return
    v = d[key]
    ok_type = isinstance(v, (int, np.integer)) if kind is int else isinstance(v, (int, float)) and not isinstance(v, bool)
    if isinstance(v, bool) or not ok_type:
        errs.append(f"{key} must be {'an integer' if kind is int else 'a number'}, got {v!r}")
        return
    if lo is not None and (v <= lo if strict_lo else v < lo):
        errs.append(f"{key} must be {'>' if strict_lo else '>='} {lo}, got {v}")


def config_from_dict(d: dict, strict: bool = True) -> RunConfig:
    """Validate a mapping; raise :class:`ConfigError` listing every violation."""
    if not isinstance(d, dict):
        raise ConfigError(["configuration must be a mapping"])
    d = copy.deepcopy(d)
    errs = []
    if "preset" in d:
        name = d.pop("preset")
        if name not in PRESETS:
            raise ConfigError([f"unknown preset {name!r}"])
        base = copy.deepcopy(PRESETS[name])
        base.update(d)
        d = base
    unknown = sorted(set(d) - _KEYS)
    if unknown and strict:
        errs.append(f"unknown keys: {', '.join(unknown)}")
    for k in unknown:
        d.pop(k)

    target = d.get("target")
    if target not in MODELS:
        errs.append(f"target must be one of {sorted(MODELS)}, got {target!r}")
    sampler = d.get("sampler")
    if sampler not in SAMPLERS:
        errs.append(f"sampler must be one of {list(SAMPLERS)}, got {sampler!r}")
    kernel = d.get("kernel")
    if kernel is not None and kernel not in KERNELS:
        errs.append(f"kernel must be one of {sorted(KERNELS)}, got {kernel!r}")
    if not isinstance(d.get("target_params", {}), dict):
        errs.append("target_params must be a mapping")

    rates = d.get("rates", {})
    rate_obj = None
    if isinstance(rates, dict):
        bad = sorted(set(rates) - {"alpha_b", "alpha_j", "lambda_ref"})
        if bad:
            errs.append(f"unknown rate keys: {', '.join(bad)}")
        else:
            try:
                rate_obj = RateParams(**{k: float(v) for k, v in rates.items()})
            except (DomainError, TypeError, ValueError) as exc:
                errs.append(str(exc))
    else:
        errs.append("rates must be a mapping")

    _check_number(errs, d, "num_samples", int, 1)
    _check_number(errs, d, "num_chains", int, 1)
    _check_number(errs, d, "seed", int, 0)
    _check_number(errs, d, "init_scale", float, 0, strict_lo=True)
    _check_number(errs, d, "reference_size", int, 1)

    is_pt = sampler in PT_SAMPLERS
    betas = d.get("betas")
    if is_pt and betas is None:
        errs.append(f"{sampler} requires betas")
    if not is_pt and betas is not None:
        errs.append(f"betas are only used by {' / '.join(PT_SAMPLERS)}")
    if betas is not None:
        try:
            Ladder(betas)
        except ConfigError as exc:
            errs.extend(exc.violations)
        except (TypeError, ValueError):
            errs.append("betas must be a list of numbers")

    part = d.get("partition")
    if sampler == "bpspt-infinite":
        if part is None:
            errs.append("bpspt-infinite requires a partition")
        _check_number(errs, d, "t_beta", float, 0, strict_lo=True, required=True)
        _check_number(errs, d, "n_s", int, 1, required=True)
        si = d.get("sample_interval")
        if si is not None and isinstance(d.get("t_beta"), (int, float)) and isinstance(d.get("n_s"), int):
            if abs(si - d["n_s"] * d["t_beta"]) > 1e-12 * max(1.0, si):
                errs.append(f"sample_interval {si} differs from n_s * t_beta")
        if part is not None:
            if not (isinstance(part, dict) and set(part) == {"A", "B"}):
                errs.append("partition must be a mapping with keys A and B")
            elif betas is not None and not errs:
                try:
                    PartitionPair.from_one_based(part["A"], part["B"], d["t_beta"], d["n_s"], L=len(betas))
                except ConfigError as exc:
                    errs.extend(exc.violations)
                except (TypeError, ValueError, IndexError):
                    errs.append("partition blocks must be lists of 1-based slot indices")
    else:
        if part is not None:
            errs.append("partition is only used by bpspt-infinite")
        for k in ("t_beta", "n_s"):
            if d.get(k) is not None:
                errs.append(f"{k} is only used by bpspt-infinite")
        d.setdefault("sample_interval", 1.0)
        _check_number(errs, d, "sample_interval", float, 0, strict_lo=True)

    if sampler == "bpspt-finite":
        _check_number(errs, d, "alpha_s", float, 0, required=True)
    elif d.get("alpha_s") is not None:
        errs.append("alpha_s is only used by bpspt-finite")

    if not errs and target in MODELS:
        try:
            model = build_model(target, **d.get("target_params", {}))
        except (TypeError, DomainError) as exc:
            errs.append(f"target_params: {exc}")
        else:
            if sampler == "bps" and model.n_states != 1:
                errs.append("sampler bps needs a purely continuous target; use bps-mixed")
            if sampler == "bps-mixed" and model.n_states < 2:
                errs.append("sampler bps-mixed needs a discrete part; use bps")
            if model.n_states > 1 and kernel is None:
                errs.append("a kernel is required for targets with a discrete part")
            if kernel == "suwa-todo" and model.n_states > 64:
                errs.append("suwa-todo needs an enumerable state set (at most 64 states)")
    if d.get("backend") not in (None, "auto", "compiled", "python"):
        errs.append("backend must be auto, compiled or python")
    if errs:
        raise ConfigError(errs)
    d["rates"] = rate_obj
    return RunConfig(**d)


def parse_config(text: str, strict: bool = True) -> RunConfig:
    """Parse a YAML (or JSON) document into a validated :class:`RunConfig`."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"not a valid YAML/JSON document: {exc}"]) from None
    return config_from_dict(doc if doc is not None else {}, strict)


def load_preset(name: str, desk_scale: bool = False, **overrides) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError([f"unknown preset {name!r}; choose from {sorted(PRESETS)}"])
    d = copy.deepcopy(PRESETS[name])
    if desk_scale:
        d["num_samples"] = max(1, d["num_samples"] // 10)
    d.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(d)


def chain_seed(base_seed: int, chain: int) -> int:
    """Seed of chain ``chain``: first word of ``SeedSequence(base, spawn_key=(chain,))``."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(chain),))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class ChainResult:
    chain: int
    seed: int
    traces: list
    counters: dict
    wall_time: float
    backend: str
    report: dict = field(default_factory=dict)


def run_chain(cfg: RunConfig, chain: int) -> ChainResult:
    """Run one chain of ``cfg``; slot 0 is the target temperature."""
    seed = chain_seed(cfg.seed, chain)
    model = cfg.model()
    kernel = cfg.kernel_obj()
    bcfg = cfg.bps_config(seed)
    t0 = time.perf_counter()
    report = {}
    try:
        traces, report = _simulate(cfg, model, kernel, bcfg)
    except DivergenceError as exc:
        raise DivergenceError(f"chain {chain} (seed {seed}): {exc}") from exc
    wall = time.perf_counter() - t0
    return ChainResult(chain, seed, traces, traces[0].counters.as_dict(), wall, traces[0].meta["backend"], report)


def _simulate(cfg, model, kernel, bcfg):
    report = {}
    if cfg.sampler == "bps":
        traces = [run_bps_continuous(model, bcfg, backend=cfg.backend)]
    elif cfg.sampler == "bps-mixed":
        traces = [run_bps_mixed(model, kernel, bcfg, backend=cfg.backend)]
    elif cfg.sampler == "bpspt-infinite":
        res = run_bpspt_infinite(model, kernel, cfg.ladder(), cfg.partition_pair(), bcfg, backend=cfg.backend)
        traces = res.traces
        report = res.report()
    else:
        res = run_bpspt_finite(model, kernel, cfg.ladder(), cfg.alpha_s, bcfg, backend=cfg.backend)
        traces = res.traces
        report = res.report()
    return traces, report


def _worker_count(n_chains: int) -> int:
    env = os.environ.get("BPSPT_WORKERS")
    if env:
        try:
            w = int(env)
        except ValueError:
            raise ConfigError([f"BPSPT_WORKERS must be an integer, got {env!r}"]) from None
        if w < 1:
            raise ConfigError(["BPSPT_WORKERS must be >= 1"])
    else:
        w = os.cpu_count() or 1
    return max(1, min(w, n_chains))


def _run_chain_args(args):
    return run_chain(*args)


def run_chains(cfg: RunConfig) -> list:
    workers = _worker_count(cfg.num_chains)
    jobs = [(cfg, c) for c in range(cfg.num_chains)]
    if workers == 1:
        return [run_chain(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_chain_args, jobs))


def reference_sample(cfg: RunConfig, n: Optional[int] = None):
    """Exact draws from the target, on a stream no chain uses."""
    model = cfg.model()
    n = n or cfg.reference_size or cfg.num_samples
    return model.sample(make_rng(cfg.seed, REFERENCE_STREAM), n)


@dataclass
class RunSummary:
    config: dict
    version: str
    seeds: list
    chains: list
    wall_time: float
    diagnostics: Optional[dict]
    files: list

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.integer, np.floating)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def run(cfg: RunConfig, out_dir=None, diagnose: bool = True) -> RunSummary:
    """Run every chain, write traces and reports, return the summary.

    Files: ``chain{c}_slot{s}.csv`` per chain and ladder slot,
    ``summary.json`` and ``diagnostics.csv``.
    """
    out = Path(out_dir or cfg.output or "runs/out")
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    results = run_chains(cfg)
    wall = time.perf_counter() - t0
    files = []
    for r in results:
        for s, tr in enumerate(r.traces):
            files.append(str(tr.to_csv(out / f"chain{r.chain:02d}_slot{s:02d}.csv")))
    diag = None
    if diagnose:
        model = cfg.model()
        ref_x, _ = reference_sample(cfg)
        rep = diagnose_chains([r.traces[0].x for r in results], [r.traces[0].y for r in results], ref_x,
                              model=model)
        ns, curve = prefix_ks_curve(results[0].traces[0].x, ref_x)
        rep.extra["prefix_ks_n"] = ns.tolist()
        rep.extra["prefix_ks_chain0"] = curve.tolist()
        if len(ns) > 1:
            rep.extra["prefix_ks_slope"] = ks_trend_slope(ns, curve)
        rep.extra["reductions"] = {"max_ks": "max over components, mean over chains",
                                   "min_ess": "min over components, mean over chains"}
        rep.to_csv(out / "diagnostics.csv")
        files.append(str(out / "diagnostics.csv"))
        diag = asdict(rep)
    chains = [{"chain": r.chain, "seed": r.seed, "counters": r.counters, "wall_time": r.wall_time,
               "backend": r.backend, "ladder": r.report} for r in results]
    summary = RunSummary(cfg.to_dict(), __version__, [r.seed for r in results], chains, wall, diag,
                         files + [str(out / "summary.json")])
    (out / "summary.json").write_text(summary.to_json())
    return summary


def load_traces(paths) -> list:
    traces = [SampleTrace.from_csv(p) for p in paths]
    if not traces:
        raise DataError("no trace files given")
    dims = {t.dim for t in traces}
    if len(dims) != 1:
        raise DataError(f"traces have different dimensions {sorted(dims)}")
    return traces


def diagnose(paths, target: Optional[str] = None, target_params: Optional[dict] = None, reference=None,
             seed: int = 0, n_reference: Optional[int] = None) -> DiagnosticsReport:
    """Metrics of trace files against an exact sample of ``target`` or a reference trace file."""
    traces = load_traces(paths)
    model = build_model(target, **(target_params or {})) if target else None
    if reference is not None:
        ref_x = SampleTrace.from_csv(reference).x
    elif model is not None:
        ref_x = model.sample(make_rng(seed, REFERENCE_STREAM), n_reference or len(traces[0]))[0]
    else:
        raise DataError("need a target or a reference trace")
    if ref_x.shape[1] != traces[0].dim:
        raise DataError(f"reference has dimension {ref_x.shape[1]}, traces have {traces[0].dim}")
    rep = diagnose_chains([t.x for t in traces], [t.y for t in traces], ref_x, model=model)
    ns, curve = prefix_ks_curve(traces[0].x, ref_x)
    rep.extra["prefix_ks_n"] = ns.tolist()
    rep.extra["prefix_ks_chain0"] = curve.tolist()
    if len(ns) > 1:
        rep.extra["prefix_ks_slope"] = ks_trend_slope(ns, curve)
    return rep
