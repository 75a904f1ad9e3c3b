"""Command-line entry points.

Subcommands: `run` (one strategy), `compare` (several on identical
inputs), `day-ahead` (crucial-set extraction to a file), `dump-ptdf`
(shift-factor matrix as CSV), and `eval-model` (replay a trained model
against a recorded ledger).  Exit status of `run`/`compare` is nonzero
when any interval needed the penalized soft mode.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np


def _add_scenario_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="scenario INI file")
    p.add_argument("--case", help="MATPOWER-style case file")
    p.add_argument("--profile", help="load CSV (default: bundled synthetic shape)")
    p.add_argument("--horizon", type=int, help="number of 5-minute intervals")
    p.add_argument("--output", help="output directory")
    p.add_argument("--df-strategy", choices=("const", "mer", "knn", "stgcn", "oracle"),
                   help="distribution-factor updating strategy")
    p.add_argument("--knn-k", type=int, help="neighbours for the knn strategy")
    p.add_argument("--stgcn-model", help="weight manifest for the stgcn strategy")
    p.add_argument("--k", type=int, help="constraints admitted per icci round")
    p.add_argument("--icci-tol", type=float, help="violation tolerance in MW")
    p.add_argument("--icci-max-iter", type=int, help="icci iteration cap")
    p.add_argument("--penalty", type=float, help="violation price in $/MW")
    p.add_argument("--seed", type=int, help="master seed offset for the scenario")


def _build_config(args) -> "RunConfig":
    from .harness import RunConfig

    cfg = RunConfig.from_ini(args.config) if args.config else RunConfig()
    overrides = {
        "case_path": args.case, "profile_path": args.profile,
        "horizon": args.horizon, "output_dir": args.output,
        "strategy": getattr(args, "df_strategy", None),
        "knn_k": args.knn_k, "stgcn_model": args.stgcn_model,
        "icci_k": args.k, "icci_tol": args.icci_tol,
        "icci_max_iter": args.icci_max_iter, "penalty_price": args.penalty,
    }
    from dataclasses import replace
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.seed is not None:
        overrides.update(seed_deras=args.seed + 1, seed_bids=args.seed + 2,
                         seed_tder=args.seed + 3, seed_profile=args.seed + 4)
    return replace(cfg, **overrides)


def cmd_run(args) -> int:
    from .harness import run_rolling, write_intervals_csv

    config = _build_config(args)
    if args.dump_lp:
        _dump_first_lp(config, args.dump_lp)
    if args.dump_ptdf:
        from .harness import prepare_env
        from .sensitivity import dump_ptdf_csv
        env = prepare_env(config)
        with open(args.dump_ptdf, "w", encoding="utf-8") as fh:
            fh.write(dump_ptdf_csv(env.sens))
    summary, records = run_rolling(config, keep_records=True)
    if config.output_dir:
        write_intervals_csv(os.path.join(config.output_dir, "intervals.csv"),
                            {summary.strategy: records})
    print(f"{summary.strategy}: mean cost {summary.mean_cost:.2f} $/interval, "
          f"penalty {summary.total_penalty:.2f} $, "
          f"accuracy {summary.mean_accuracy:.2f} %, "
          f"mean solve {summary.mean_solve_ms:.1f} ms, "
          f"icci iters {summary.mean_icci_iterations:.2f}, "
          f"soft intervals {summary.soft_intervals}")
    return 0 if summary.soft_intervals == 0 else 1


def cmd_compare(args) -> int:
    from .harness import compare_strategies

    config = _build_config(args)
    strategies = args.strategies.split(",")
    summaries, report = compare_strategies(config, strategies)
    print(report, end="")
    return 0 if all(s.soft_intervals == 0 for s in summaries) else 1


def cmd_day_ahead(args) -> int:
    from .harness import prepare_env
    from .icci import save_crucial_set

    config = _build_config(args)
    env = prepare_env(config)
    save_crucial_set(env.day_ahead, args.out)
    print(f"day-ahead crucial set: {len(env.day_ahead)} bound refs -> {args.out}")
    return 0


def cmd_dump_ptdf(args) -> int:
    from .caseio import parse_case
    from .sensitivity import compute_isf, dump_ptdf_csv

    with open(args.case, encoding="utf-8") as fh:
        case = parse_case(fh.read())
    text = dump_ptdf_csv(compute_isf(case))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"wrote {len(case.lines)}x{case.n_buses} shift factors to {args.out}")
    return 0


def cmd_eval_model(args) -> int:
    from .caseio import parse_case
    from .harness import evaluate_model_on_ledger, prepare_env, RunConfig
    from .ledger import LedgerView
    from .stgcn import load_model

    model = load_model(args.model)
    with open(args.case, encoding="utf-8") as fh:
        case = parse_case(fh.read())
    config = RunConfig.from_ini(args.config) if args.config else RunConfig()
    from dataclasses import replace
    config = replace(config, use_day_ahead=False, horizon=1)
    env = prepare_env(config, case=case)
    view = LedgerView.open(args.ledger, env.case)
    pairs = evaluate_model_on_ledger(view, model)
    if not pairs:
        print("ledger too short for the model window")
        return 1
    accs = np.array([a for _, a in pairs])
    print(f"evaluated {len(pairs)} intervals: mean accuracy {accs.mean():.3f} %, "
          f"min {accs.min():.3f} %, max {accs.max():.3f} %")
    return 0


def _dump_first_lp(config, path: str) -> None:
    from .harness import prepare_env
    from .lpcore import dump_lp
    from .rted import DfVector, build_rted

    env = prepare_env(config)
    dfs = DfVector.uniform(env.case)
    model = build_rted(env.case, env.sens, dfs, env.profile.at(0), None,
                       env.day_ahead, t=0)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_lp(model))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="derdispatch",
        description="rolling real-time dispatch with DER aggregation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="roll one strategy over the horizon")
    _add_scenario_args(p_run)
    p_run.add_argument("--dump-lp", help="write the first interval's LP text here")
    p_run.add_argument("--dump-ptdf", help="write the scenario's shift factors here")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run several strategies on equal inputs")
    _add_scenario_args(p_cmp)
    p_cmp.add_argument("--strategies", default="const,mer,oracle",
                       help="comma-separated strategy list")
    p_cmp.set_defaults(func=cmd_compare)

    p_da = sub.add_parser("day-ahead", help="extract the baseline crucial set")
    _add_scenario_args(p_da)
    p_da.add_argument("--out", required=True, help="crucial-set JSON path")
    p_da.set_defaults(func=cmd_day_ahead)

    p_ptdf = sub.add_parser("dump-ptdf", help="write shift factors as CSV")
    p_ptdf.add_argument("--case", required=True)
    p_ptdf.add_argument("--out", required=True)
    p_ptdf.set_defaults(func=cmd_dump_ptdf)

    p_eval = sub.add_parser("eval-model", help="replay a model against a ledger")
    p_eval.add_argument("--model", required=True, help="weight manifest")
    p_eval.add_argument("--ledger", required=True, help="ledger directory")
    p_eval.add_argument("--case", required=True, help="case file of the run")
    p_eval.add_argument("--config", help="scenario INI for DERA construction")
    p_eval.set_defaults(func=cmd_eval_model)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
