"""Command line benchmark runner: list, run, report, cache-eigsys."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import bench
from .grid import save_eigensystem


def _load_config(args) -> bench.BenchmarkConfig:
    kwargs = {}
    if args.config:
        with open(args.config) as fh:
            kwargs.update(json.load(fh))
    if args.name:
        kwargs["name"] = args.name
    if args.method:
        kwargs["method"] = args.method
    if args.seed is not None:
        kwargs["seed"] = args.seed
    if args.smoke:
        kwargs["smoke"] = True
    if "name" not in kwargs:
        raise bench.BenchmarkError("a benchmark name is required (positional or in --config)")
    return bench.BenchmarkConfig(**kwargs)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="eigctrl-bench")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_list = sub.add_parser("list", help="list registered benchmarks")

    p_run = sub.add_parser("run", help="run one benchmark")
    p_run.add_argument("name", nargs="?", help="benchmark name")
    p_run.add_argument("--config", help="JSON config file (echoed into the manifest)")
    p_run.add_argument("--method", choices=bench.METHODS)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out", default="results", help="output directory")
    p_run.add_argument("--smoke", action="store_true", help="reduced-scale run")

    p_rep = sub.add_parser("report", help="tabulate metric files")
    p_rep.add_argument("files", nargs="+")

    p_cache = sub.add_parser("cache-eigsys", help="precompute and cache a grid eigensystem")
    p_cache.add_argument("name", nargs="?", help="benchmark name")
    p_cache.add_argument("--config", help="JSON config file")
    p_cache.add_argument("--method", choices=bench.METHODS)
    p_cache.add_argument("--seed", type=int)
    p_cache.add_argument("--out", help="cache file path")
    p_cache.add_argument("--smoke", action="store_true")

    args = parser.parse_args(argv)
    try:
        if args.verb == "list":
            for cfg in bench.registry():
                print(cfg.name)
            return 0
        if args.verb == "run":
            cfg = _load_config(args)
            paths = bench.run(cfg, args.out)
            print(paths["metrics"])
            return 0
        if args.verb == "report":
            print(bench.report(args.files))
            return 0
        if args.verb == "cache-eigsys":
            cfg = _load_config(args)
            problem, extras = bench.build_problem(cfg)
            sys_l = bench.grid_reference_system(cfg, problem, extras)
            cache_dir = os.environ.get("EIGCTRL_CACHE", ".")
            out = args.out or os.path.join(cache_dir, f"{cfg.name}_eigsys.npz")
            base = sys_l.base
            if hasattr(base, "per_dim"):
                for i, sub_sys in enumerate(base.per_dim):
                    part = out.replace(".npz", f"_dim{i}.npz")
                    save_eigensystem(part, sub_sys)
                    print(part)
            else:
                save_eigensystem(out, base)
                print(out)
            return 0
    except Exception as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
