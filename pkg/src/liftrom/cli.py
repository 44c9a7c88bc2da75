"""Command line entry point: ``liftrom run|bounds|sweep|describe``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, bundled_config

log = logging.getLogger("liftrom")

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _load(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig.from_dict(bundled_config("paper"))
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_overrides(**{"estimator.seed": args.seed})
    if getattr(args, "noiseless", False):
        cfg = cfg.with_overrides(**{"estimator.noiseless": True})
    return cfg


def _out(args, cfg) -> Path:
    return Path(args.out) if args.out else Path(cfg["output"]["directory"])


def cmd_run(args) -> int:
    from .output import emit_outputs
    from .pipeline import run_benchmark

    cfg = _load(args)
    report = run_benchmark(cfg)
    out = _out(args, cfg)
    for path in emit_outputs(report, out):
        log.info("wrote %s", path)
    for name, e in report.endpoints.items():
        print(f"{name:18s} final {100 * e['final']:7.2f}%   max {100 * e['max']:7.2f}% at t={e['argmax_t']:.2f}")
    if report.violations:
        print("bound checks failed: " + ", ".join(report.violations), file=sys.stderr)
        return EXIT_VIOLATIONS
    return EXIT_OK


def cmd_bounds(args) -> int:
    from .bounds import run_bound_suite

    res = run_bound_suite(args.trials, args.seed or 0, adversarial=args.adversarial, zero_perturbation=args.zero_perturbation)
    summary = res.to_dict()
    text = json.dumps(summary, indent=2)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bounds.json").write_text(text + "\n")
    return EXIT_VIOLATIONS if res.total_violations else EXIT_OK


def _parse_values(raw: str) -> list:
    vals = []
    for item in raw.split(","):
        item = item.strip()
        try:
            vals.append(json.loads(item))
        except json.JSONDecodeError:
            vals.append(item)
    return vals


def cmd_sweep(args) -> int:
    from .pipeline import run_sweep

    cfg = _load(args)
    rows = run_sweep(cfg, args.field, _parse_values(args.values), _out(args, cfg), trials=args.trials or 1)
    print("value,trial,seed," + ",".join(f"{m}_final" for m in rows[0]["endpoints"]))
    for r in rows:
        print(f"{r['value']},{r['trial']},{r['seed']}," + ",".join("%.6e" % e["final"] for e in r["endpoints"].values()))
    return EXIT_VIOLATIONS if any(r["violations"] for r in rows) else EXIT_OK


def cmd_describe(args) -> int:
    from .pipeline import describe

    print(json.dumps(describe(_load(args)), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="liftrom", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", metavar="PATH", help="run configuration (default: bundled paper.json)")
        sp.add_argument("--out", metavar="DIR", help="output directory (default: output.directory)")
        if seed:
            sp.add_argument("--seed", type=int, metavar="N", help="override estimator.seed")
            sp.add_argument("--noiseless", action="store_true", help="use exact pencils in the sampled lane")

    sp = sub.add_parser("run", help="benchmark run; writes CSV, report.json and optional SVG")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("bounds", help="randomized bound verification suite")
    sp.add_argument("--trials", type=int, default=500, metavar="N")
    sp.add_argument("--seed", type=int, default=0, metavar="N")
    sp.add_argument("--out", metavar="DIR")
    sp.add_argument("--adversarial", action="store_true", help="near-collinear frames, Neumann term close to 1")
    sp.add_argument("--zero-perturbation", action="store_true")
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("sweep", help="vary one field over a list of values")
    common(sp)
    sp.add_argument("--field", required=True, help="dotted field, e.g. estimator.shots or frame.m")
    sp.add_argument("--values", required=True, help="comma separated JSON values")
    sp.add_argument("--trials", type=int, default=1, metavar="N", help="seeds per value")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("describe", help="print resolved auto parameters without running")
    common(sp)
    sp.set_defaults(func=cmd_describe)
    return p


def main(argv=None) -> int:
    from .pipeline import StageError

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"numerical failure {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
