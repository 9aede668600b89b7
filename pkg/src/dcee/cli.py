"""Command-line harness: run, compare, bench, audit, check."""
from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys

import numpy as np

from .acceptance import run_all
from .config import CONTROLLER_TYPES, load_config, scenario_from_dict
from .diagnostics import derivative_audit, random_problem
from .errors import DceeError
from .harness import bench_solver, export, run_closed_loop


def _resolve_config(args):
    path = getattr(args, "config_flag", None) or getattr(args, "config", None)
    if path is None:
        raise DceeError("a scenario config file is required (positional or --config)")
    cfg = load_config(path)
    if getattr(args, "seed", None) is not None:
        raw = dict(cfg.raw)
        raw["noise"] = dict(raw["noise"], seed=int(args.seed))
        cfg = scenario_from_dict(raw)
    return cfg


def _ensure_out(args):
    if args.out:
        os.makedirs(args.out, exist_ok=True)
    return args.out


def _print_metrics(tag, result):
    m = result.metrics
    t = result.timing
    print(
        f"{tag}: e_v={m['e_v']:.6g} m/s  IAE_v={m['iae_v']:.6g} m/s  Reg={m['regret']:.6g}  "
        f"solver mean {t['mean_ns']/1e6:.3f} ms / p99 {t['p99_ns']/1e6:.3f} ms / max {t['max_ns']/1e6:.3f} ms"
    )


def _cmd_run(args) -> int:
    cfg = _resolve_config(args)
    result = run_closed_loop(cfg)
    _print_metrics(f"run[{cfg.controller.type}]", result)
    out = _ensure_out(args)
    if out:
        path = os.path.join(out, f"run.{args.format}")
        export(result, path, args.format)
        print(f"wrote {path}")
    return 0


def _cmd_compare(args) -> int:
    cfg = _resolve_config(args)
    controllers = [c.strip() for c in args.controllers.split(",") if c.strip()]
    for c in controllers:
        if c not in CONTROLLER_TYPES:
            raise DceeError(f"unknown controller {c!r}; choose from {CONTROLLER_TYPES}")
    workers = max(1, int(os.environ.get("DCEE_THREADS", "1")))

    def one(controller):
        raw = dict(cfg.raw)
        raw["controller"] = dict(raw["controller"], type=controller)
        return controller, run_closed_loop(scenario_from_dict(raw))

    results = {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        for controller, result in pool.map(one, controllers):
            results[controller] = result
    out = _ensure_out(args)
    summary = {}
    for controller in controllers:
        result = results[controller]
        _print_metrics(f"compare[{controller}]", result)
        summary[controller] = {"metrics": result.metrics, "timing": result.timing}
        if out:
            path = os.path.join(out, f"compare_{controller}.csv")
            export(result, path, "csv")
            print(f"wrote {path}")
    if out:
        path = os.path.join(out, "compare_summary.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {path}")
    return 0


def _cmd_bench(args) -> int:
    cfg = _resolve_config(args)
    report = bench_solver(cfg, repetitions=args.reps)
    for name, stats in report["timing"].items():
        print(
            f"bench[{name}]: mean {stats['mean_ns']/1e6:.4f} ms  "
            f"p99 {stats['p99_ns']/1e6:.4f} ms  max {stats['max_ns']/1e6:.4f} ms"
        )
    for name, ratio in report["speedup_vs_analytic"].items():
        print(f"bench[speedup]: {name} / analytic_gn = {ratio:.2f}x")
    print(
        f"bench[agreement]: max relative objective spread {report['agreement_max_rel']:.2e} "
        f"over {report['agreement_checks']} checks"
    )
    out = _ensure_out(args)
    if out:
        path = os.path.join(out, "bench.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {path}")
    return 0


def _cmd_audit(args) -> int:
    cfg = _resolve_config(args)
    rng = np.random.default_rng(cfg.ensemble.seed)
    template = random_problem(rng, vehicle=cfg.vehicle, reward=cfg.reward)
    report = derivative_audit(template, samples=args.samples, seed=cfg.noise.seed)
    payload = report.as_dict()
    payload["passed"] = report.passed
    print(json.dumps(payload, indent=2, sort_keys=True))
    out = _ensure_out(args)
    if out:
        path = os.path.join(out, "audit.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {path}")
    return 0 if report.passed else 1


def _cmd_check(args) -> int:
    results = run_all(print)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 0 if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcee",
        description="Closed-loop eco-cruising harness for the structure-exploiting "
        "dual-control optimizer and its baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one controller and export the trajectory")
    p_run.add_argument("config", nargs="?", help="scenario YAML file")
    p_run.add_argument("--config", dest="config_flag", metavar="PATH")
    p_run.add_argument("--out", metavar="DIR")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--format", choices=("csv", "json"), default="csv")
    p_run.set_defaults(fn=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run several controllers on the same scenario")
    p_cmp.add_argument("config", nargs="?")
    p_cmp.add_argument("--config", dest="config_flag", metavar="PATH")
    p_cmp.add_argument("--controllers", default="numerical_dcee,grad_dcee,esc")
    p_cmp.add_argument("--out", metavar="DIR")
    p_cmp.add_argument("--seed", type=int)
    p_cmp.set_defaults(fn=_cmd_compare)

    p_bench = sub.add_parser("bench", help="time the solver against internal references")
    p_bench.add_argument("config", nargs="?")
    p_bench.add_argument("--config", dest="config_flag", metavar="PATH")
    p_bench.add_argument("--reps", type=int, default=1)
    p_bench.add_argument("--out", metavar="DIR")
    p_bench.add_argument("--seed", type=int)
    p_bench.set_defaults(fn=_cmd_bench)

    p_audit = sub.add_parser("audit", help="randomized derivative and decomposition audit")
    p_audit.add_argument("config", nargs="?")
    p_audit.add_argument("--config", dest="config_flag", metavar="PATH")
    p_audit.add_argument("--samples", type=int, default=100)
    p_audit.add_argument("--out", metavar="DIR")
    p_audit.add_argument("--seed", type=int)
    p_audit.set_defaults(fn=_cmd_audit)

    p_check = sub.add_parser("check", help="run the acceptance criteria")
    p_check.set_defaults(fn=_cmd_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except DceeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
