"""Command-line entry point wiring the library together.

Subcommands: sample, params, bound, gen-corpus, train-surrogate, search,
suite.  Exit codes: 0 success, 1 malformed input, 2 budget or limits
violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .archspace import (
    Architecture,
    EnumerationBudgetError,
    SpaceLimits,
    sample_uniform,
    search_space_upper_bound,
)
from .config import ConfigError, load_config
from .netbuild import count_params
from .oracle import OracleConfig, generate_corpus
from .qlearn import run_rl_search
from .reward import RewardConfig
from .search import (
    BudgetExhaustedError,
    evaluate_suite,
    pareto_snapshots,
    run_local_search,
    run_random_search,
    run_random_walk,
    write_pareto_csv,
    write_suite_curves,
    write_suite_summary,
    write_trace_csv,
)
from .surrogate import (
    REGRESSOR_KINDS,
    TrainedModel,
    cross_validate,
    fit,
    read_records,
    report_table,
    write_records,
)


def _add_config_arg(parser):
    parser.add_argument(
        "--config", default=None,
        help="INI config file (defaults to $NASFORGE_CONFIG if set)",
    )
    parser.add_argument(
        "--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
        dest="overrides", help="override one config value; repeatable",
    )


def _config_from(args):
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        dotted, raw = item.split("=", 1)
        overrides[dotted.strip()] = raw.strip()
    return load_config(args.config, overrides)


def cmd_sample(args) -> int:
    cfg = _config_from(args)
    rng = np.random.default_rng(args.seed)
    lines = [
        sample_uniform(rng, cfg.space).to_json() for _ in range(args.n)
    ]
    out = Path(args.out) if args.out else None
    text = "\n".join(lines) + "\n"
    if out:
        out.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_params(args) -> int:
    archs = []
    with open(args.arch_file) as fh:
        for line in fh:
            line = line.strip()
            if line:
                archs.append(Architecture.from_json(line))
    rows = [(a.to_json(), count_params(a)) for a in archs]
    width = max((len(r[0]) for r in rows), default=4)
    print(f"{'arch'.ljust(width)}  params")
    for arch_json, params in rows:
        print(f"{arch_json.ljust(width)}  {params}")
    return 0


def cmd_bound(args) -> int:
    limits = SpaceLimits(max_vertices=args.max_vertices, num_ops=args.num_ops)
    print(search_space_upper_bound(limits))
    return 0


def cmd_gen_corpus(args) -> int:
    cfg = load_config(args.oracle_config)
    records = generate_corpus(cfg.oracle, cfg.space)
    write_records(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_train_surrogate(args) -> int:
    cfg = _config_from(args)
    records = read_records(args.records)
    kind = args.kind or cfg.surrogate["kind"]
    report = cross_validate(
        kind,
        records,
        seed=cfg.surrogate["seed"],
        n_folds=cfg.surrogate["n_folds"],
        test_fraction=cfg.surrogate["test_fraction"],
    )
    if args.report_out:
        Path(args.report_out).write_text(json.dumps(report.to_json_dict(), indent=2))
    print(report_table([report]))
    if args.model_out:
        model = fit(kind, records, seed=cfg.surrogate["seed"])
        model.save(args.model_out)
        print(f"model saved to {args.model_out}")
    return 0


def _run_one_strategy(strategy, budget, reward_cfg, model, seed, limits, cfg):
    if strategy == "random":
        return run_random_search(budget, reward_cfg, model, seed, limits)
    if strategy == "walk":
        return run_random_walk(
            budget, reward_cfg, model, seed, cfg.search["episode_len"], limits
        )
    if strategy == "local":
        return run_local_search(budget, reward_cfg, model, seed, limits)
    if strategy == "rl":
        return run_rl_search(cfg.agent, reward_cfg, model, seed, budget, limits)
    raise ConfigError(f"unknown strategy {strategy!r}")


def cmd_search(args) -> int:
    cfg = _config_from(args)
    model = TrainedModel.load(args.model)
    budget = args.budget or cfg.search["budget"]
    seeds = (
        tuple(int(s) for s in args.seeds.split(",")) if args.seeds
        else tuple(cfg.search["seeds"])
    )
    out_dir = Path(args.out_dir)
    for seed in seeds:
        trace = _run_one_strategy(
            args.strategy, budget, cfg.reward, model, seed, cfg.space, cfg
        )
        run_dir = out_dir / f"seed{seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        write_trace_csv(trace, run_dir / "trace.csv")
        write_pareto_csv(pareto_snapshots(trace), run_dir / "pareto.csv")
        print(f"{args.strategy} seed {seed}: {len(trace)} queries -> {run_dir}")
    return 0


def cmd_suite(args) -> int:
    cfg = _config_from(args)
    model = TrainedModel.load(args.model)
    budget = args.budget or cfg.search["budget"]
    seeds = (
        tuple(int(s) for s in args.seeds.split(",")) if args.seeds
        else tuple(cfg.search["seeds"])
    )
    strategies = tuple(s.strip() for s in args.strategies.split(","))
    runs = evaluate_suite(
        strategies,
        model,
        cfg.reward,
        budget=budget,
        n_sets=cfg.search["n_sets"],
        set_size=cfg.search["set_size"],
        seeds=seeds,
        limits=cfg.space,
        agent_cfg=cfg.agent,
        episode_len=cfg.search["episode_len"],
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_suite_summary(runs, out_dir / "suite_summary.csv")
    write_suite_curves(runs, budget, out_dir / "suite_curves.csv")
    print(f"{len(runs)} runs -> {out_dir / 'suite_summary.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nasforge",
        description="Multi-objective architecture search over labeled DAGs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw architectures as JSONL")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    _add_config_arg(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("params", help="parameter counts for a JSONL of architectures")
    p.add_argument("--arch-file", required=True)
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("bound", help="exact upper bound on the space size")
    p.add_argument("--max-vertices", type=int, default=8)
    p.add_argument("--num-ops", type=int, default=10)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("gen-corpus", help="synthetic performance records")
    p.add_argument("--oracle-config", default=None, help="INI config file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("train-surrogate", help="cross-validate and fit a predictor")
    p.add_argument("--kind", choices=REGRESSOR_KINDS, default=None)
    p.add_argument("--records", required=True)
    p.add_argument("--report-out", default=None)
    p.add_argument("--model-out", default=None)
    _add_config_arg(p)
    p.set_defaults(func=cmd_train_surrogate)

    p = sub.add_parser("search", help="run one strategy, write trace and pareto CSVs")
    p.add_argument("--strategy", choices=("random", "walk", "local", "rl"), required=True)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--model", required=True)
    p.add_argument("--seeds", default=None, help="comma-separated, e.g. 0,1,2")
    p.add_argument("--out-dir", required=True)
    _add_config_arg(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("suite", help="compare strategies, write summary CSVs")
    p.add_argument("--strategies", default="random,walk,local,rl")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--model", required=True)
    p.add_argument("--seeds", default=None)
    p.add_argument("--out-dir", required=True)
    _add_config_arg(p)
    p.set_defaults(func=cmd_suite)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BudgetExhaustedError, EnumerationBudgetError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ConfigError, OSError, ValueError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
