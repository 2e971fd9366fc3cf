"""Command-line entry point: ``marl-ngu {train,compare,dump-env,plot}``.

Exit codes: 0 success, 2 configuration error, 3 training divergence, 4 I/O.
The default output root is ``$MARL_NGU_RESULTS`` or ``./results``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import load_config
from .env import dump_trajectory
from .errors import ConfigurationError, TrainingDivergenceError
from .metrics import read_aggregate_csv, write_combined_csv, write_svg
from .runner import make_env, run_experiment, save_results

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4


def _default_out() -> str:
    return os.environ.get("MARL_NGU_RESULTS", "results")


def _seed_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}")


def _summary(agg) -> str:
    if len(agg.mean) == 0:
        return f"{agg.name}: no complete episodes (n_runs={agg.n_runs})"
    half = agg.ci_high[-1] - agg.mean[-1]
    return f"{agg.name}: final smoothed return {agg.mean[-1]:.4f} +/- {half:.4f} (n_runs={agg.n_runs})"


def _load(paths, seeds):
    configs = []
    for p in paths:
        cfg = load_config(p)
        if seeds:
            cfg = cfg.with_overrides(seeds=tuple(seeds))
        configs.append(cfg)
    return configs


def cmd_train(args) -> int:
    if len(args.config) != 1:
        raise ConfigurationError("train takes exactly one --config", "config")
    (cfg,) = _load(args.config, args.seeds)
    agg = run_experiment(cfg, jobs=args.jobs, cache_root=args.out)
    save_results(cfg, agg, args.out)
    print(_summary(agg))
    return EXIT_OK


def cmd_compare(args) -> int:
    if len(args.config) < 2:
        raise ConfigurationError("compare needs at least two --config files", "config")
    configs = _load(args.config, args.seeds)
    dims = {make_env(c).obs_dim for c in configs}
    if len(dims) > 1:
        raise ConfigurationError(f"configs disagree on observation dimension: {sorted(dims)}", "n_pursuers")
    aggs = []
    for cfg in configs:
        agg = run_experiment(cfg, jobs=args.jobs, cache_root=args.out)
        save_results(cfg, agg, args.out)
        aggs.append(agg)
        print(_summary(agg))
    os.makedirs(args.out, exist_ok=True)
    write_combined_csv(aggs, os.path.join(args.out, "compare_aggregate.csv"))
    for shared, label in ((False, "individual"), (True, "shared")):
        group = [a for a in aggs if a.shared_buffer == shared]
        if group:
            write_svg(group, os.path.join(args.out, f"compare_{label}.svg"),
                      title=f"{label} replay buffer")
    return EXIT_OK


def cmd_dump_env(args) -> int:
    kwargs = {}
    if args.config:
        cfg = load_config(args.config[0])
        kwargs = dict(n_pursuers=cfg.n_pursuers, n_obstacles=cfg.n_obstacles)
    if args.out == "-":
        dump_trajectory(sys.stdout, args.seed, args.steps, args.policy, **kwargs)
    else:
        parent = os.path.dirname(os.path.abspath(args.out))
        os.makedirs(parent, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            dump_trajectory(fh, args.seed, args.steps, args.policy, **kwargs)
    return EXIT_OK


def cmd_plot(args) -> int:
    aggs = []
    for path in args.config:
        cfg = load_config(path)
        aggs.append(read_aggregate_csv(os.path.join(args.out, cfg.name, "aggregate.csv"), cfg.name))
    for path in args.aggregates:
        aggs.append(read_aggregate_csv(path))
    if not aggs:
        raise ConfigurationError("plot needs --config files or aggregate.csv paths", "config")
    target = args.svg or os.path.join(args.out, "plot.svg")
    write_svg(aggs, target, title=args.title)
    print(target)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="marl-ngu", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", action="append", default=[], required=config_required,
                       help="TOML experiment config (repeatable)")
        p.add_argument("--out", default=_default_out(), help="results root directory")

    p = sub.add_parser("train", help="train one configuration over its seeds")
    common(p)
    p.add_argument("--seeds", type=_seed_list, help="override the seed list, e.g. 1,2,3")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="train several configurations and overlay their curves")
    common(p)
    p.add_argument("--seeds", type=_seed_list)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("dump-env", help="write a per-step entity trajectory CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=25)
    p.add_argument("--policy", choices=("random", "zero"), default="random")
    p.add_argument("--config", action="append", default=[], help="take the layout from a config")
    p.add_argument("--out", default="-", help="output CSV path, '-' for stdout")
    p.set_defaults(func=cmd_dump_env)

    p = sub.add_parser("plot", help="render stored aggregates into one SVG")
    common(p, config_required=False)
    p.add_argument("aggregates", nargs="*", help="aggregate.csv files")
    p.add_argument("--svg", help="output SVG path (default <out>/plot.svg)")
    p.add_argument("--title", default="")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        where = f" [field: {exc.field}]" if exc.field else ""
        print(f"config error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
