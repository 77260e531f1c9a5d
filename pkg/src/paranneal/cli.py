"""Command-line front end.

    paranneal quadratic   [--config PATH] [--out DIR] [--seed N] [--workers N] [--format csv|json]
    paranneal scaling     ...
    paranneal sensitivity ...
    paranneal single-run  [--config PATH] [--method M] [--objective O] [--seed N] [--out DIR]

``PA_WORKERS`` sets the default worker count.
"""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .annealing import AnnealingSchedule
from .benchmark import run_plan
from .config import METHODS, OBJECTIVES, SingleRunSpec, parse_config, plan_to_dict
from .exceptions import ConfigError, ParannealError
from .io import emit_results, write_metadata
from .mog import draw_benchmark_objective
from .objectives import mog_objective, quadratic_objective
from .optimizers import run_apf, run_apf_retain, run_pa
from .sampling import make_rng

__all__ = ["main", "single_run"]

EXPERIMENTS = ("quadratic", "scaling", "sensitivity")


def single_run(spec):
    """Run one method on the objective described by ``spec``; returns a JSON-ready dict."""
    if spec.method not in METHODS:
        raise ConfigError(f"method must be one of {', '.join(METHODS)}; got {spec.method!r}", key="method")
    obj = spec.objective_settings
    if spec.objective == "quadratic":
        objective = quadratic_objective(obj.dim)
    elif spec.objective == "mog-from-seed":
        objective = mog_objective(draw_benchmark_objective(obj.prior(), make_rng(spec.objective_seed)))
    elif spec.objective == "mog":
        objective = mog_objective(spec.mog)
    else:
        raise ConfigError(f"objective must be one of {', '.join(OBJECTIVES)}", key="objective")
    d = objective.dim
    xi = obj.xi() if spec.mog is None else np.full(d, obj.xi_factor * obj.scale)
    start = np.asarray(spec.start, dtype=float)
    rng = make_rng(spec.seed)
    if spec.method == "pa":
        record = run_pa(objective, start, spec.pa.config(xi), rng, seed=spec.seed)
    else:
        config = spec.apf.config(np.diag(xi**2))
        if spec.method == "apf":
            record = run_apf(objective, start, config, rng, seed=spec.seed)
        elif spec.method == "apf-retain":
            record = run_apf_retain(objective, start, config, rng, seed=spec.seed)
        else:
            deep = AnnealingSchedule.power_law(spec.deep_eta, spec.deep_lambda, config.n_layers)
            record = run_apf_retain(objective, start, config, rng, deep, seed=spec.seed)
    out = record.to_dict()
    out["objective"] = objective.name
    out["spec"] = plan_to_dict(spec)
    if record.mixture is not None:
        out["mixture"] = record.mixture.to_dict()
    return out


def _default_workers():
    value = os.environ.get("PA_WORKERS", "1")
    try:
        return max(1, int(value))
    except ValueError:
        raise SystemExit(f"PA_WORKERS must be an integer, got {value!r}") from None


def _build_parser():
    parser = argparse.ArgumentParser(prog="paranneal", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("single-run",):
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="key = value configuration file")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--seed", type=int, metavar="U64", help="master seed override")
        p.add_argument("--workers", type=int, default=None, metavar="N")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if name == "single-run":
            p.add_argument("--method", choices=METHODS)
            p.add_argument("--objective", choices=OBJECTIVES)
    return parser


def _load(command, path):
    text = ""
    if path:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    has_kind = any(line.split("#")[0].split("=")[0].strip() == "kind"
                   for line in text.splitlines()
                   if "=" in line and not line.lstrip().startswith("["))
    if not has_kind:
        text = f"kind = {command}\n" + text
    spec = parse_config(text)
    kind = "single-run" if isinstance(spec, SingleRunSpec) else spec.kind
    if kind != command:
        raise ConfigError(f"config kind {kind!r} does not match subcommand {command!r}", key="kind")
    return spec


def main(argv=None):
    args = _build_parser().parse_args(argv)
    workers = args.workers if args.workers is not None else _default_workers()
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return 2
    try:
        spec = _load(args.command, args.config)
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
        if args.command == "single-run":
            if args.method:
                spec = replace(spec, method=args.method)
            if args.objective:
                spec = replace(spec, objective=args.objective)
            result = single_run(spec)
            text = json.dumps(result, indent=1)
            if args.out:
                os.makedirs(args.out, exist_ok=True)
                with open(os.path.join(args.out, "run_record.json"), "w") as fh:
                    fh.write(text + "\n")
            print(text)
            return 0
        out = args.out or f"results_{args.command}"
        write_metadata(out, spec, workers)
        result = run_plan(spec, workers=workers)
        paths = emit_results(result, out, args.format, workers)
    except (ParannealError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in paths:
        print(path)
    if result.failures:
        print(f"{len(result.failures)} replicate(s) failed:", file=sys.stderr)
        for f in result.failures:
            print(f"  sweep={f['sweep']} grid_index={f['grid_index']} replicate={f['replicate']}: {f['error']}",
                  file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
