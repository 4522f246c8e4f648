"""Command line front end: ``bpspt run | diagnose | list-presets | validate-config``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .errors import BpsError, ConfigError


def _load(args) -> harness.RunConfig:
    if bool(args.config) == bool(args.preset):
        raise ConfigError(["give exactly one of --config or --preset"])
    if args.preset:
        cfg = harness.load_preset(args.preset, desk_scale=getattr(args, "desk_scale", False))
    else:
        cfg = harness.parse_config(Path(args.config).read_text())
        if getattr(args, "desk_scale", False):
            cfg.num_samples = max(1, cfg.num_samples // 10)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "chains", None) is not None:
        if args.chains < 1:
            raise ConfigError(["--chains must be >= 1"])
        cfg.num_chains = args.chains
    if getattr(args, "out", None):
        cfg.output = args.out
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    summary = harness.run(cfg, diagnose=not args.no_diagnostics)
    d = summary.diagnostics or {}
    print(f"wrote {len(summary.files)} files to {Path(summary.files[-1]).parent}")
    for key in ("max_ks", "min_ess_per_sample", "kld", "mse"):
        if d.get(key) is not None:
            print(f"{key}: {d[key]:.6g}")
    print(f"wall time: {summary.wall_time:.2f} s")
    return 0


def cmd_diagnose(args) -> int:
    params = json.loads(args.target_params) if args.target_params else None
    rep = harness.diagnose(args.traces, target=args.target, target_params=params, reference=args.reference,
                           seed=args.seed or 0)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rep.to_json(out / "diagnostics.json")
        rep.to_csv(out / "diagnostics.csv")
    print(rep.to_json())
    return 0


def cmd_list(args) -> int:
    for name in sorted(harness.PRESETS):
        print(f"{name:22s} {harness.PRESET_NOTES.get(name, '')}")
    return 0


def cmd_validate(args) -> int:
    cfg = _load(args)
    print(json.dumps(cfg.to_dict(), indent=2, default=str))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bpspt", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def source(sp):
        sp.add_argument("--config", help="YAML or JSON run configuration")
        sp.add_argument("--preset", help="named preset, see list-presets")
        sp.add_argument("--desk-scale", action="store_true", help="ten times fewer samples")

    r = sub.add_parser("run", help="run chains and write traces, summary and diagnostics")
    source(r)
    r.add_argument("--seed", type=int)
    r.add_argument("--chains", type=int)
    r.add_argument("--out", help="output directory")
    r.add_argument("--no-diagnostics", action="store_true")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("diagnose", help="metrics of trace CSVs against the target")
    d.add_argument("traces", nargs="+")
    d.add_argument("--target", help="built-in target for an exact reference sample")
    d.add_argument("--target-params", help="JSON object of target parameters")
    d.add_argument("--reference", help="reference trace CSV instead of an exact sample")
    d.add_argument("--seed", type=int)
    d.add_argument("--out")
    d.set_defaults(func=cmd_diagnose)

    sub.add_parser("list-presets", help="show the built-in presets").set_defaults(func=cmd_list)

    v = sub.add_parser("validate-config", help="check a configuration and print it resolved")
    source(v)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return 2
    except (BpsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
