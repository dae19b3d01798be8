"""Command line entry point: ``python -m bridgemarket <command>``.

Exit status is 0 on success, 2 for configuration errors and 3 for numerical
failures.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .analytics import QualityInputs, ab_coefficients, p_correct_digital, p_correct_gaussian
from .experiments import ConfigError, config_from_dict, emit_csv, load_config, run_experiment
from .pricing import GaussianPosterior, NumericUnderflowError
from .strategy import (
    adjusted_gain,
    decide,
    enumerate_strategies,
    h_surface,
    signal_independent_context,
    trace_from_schedule,
    value_recursion,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _config(args):
    cfg = load_config(args.config) if args.config else config_from_dict({})
    overrides = {"seed": args.seed, "paths": args.paths, "threads": args.threads}
    if any(v is not None for v in overrides.values()):
        cfg = cfg.with_overrides(**overrides)
    return cfg


def _out_dir(args, cfg) -> Path:
    out = Path(args.out) if getattr(args, "out", None) else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _two_agent_base(cfg):
    if len(cfg.agents) != 2:
        raise ConfigError("agents: closed-form analytics need exactly two agents")
    # surfaces describe the true information structure, not the agents' beliefs
    s1, s2 = cfg.agents[0].sigma, cfg.agents[1].sigma
    grid = cfg.grid
    return QualityInputs(grid[1], 0.0, s1, s2, cfg.model, cfg.T), grid


def cmd_simulate(args) -> int:
    cfg = _config(args)
    result = run_experiment(cfg)
    out = _out_dir(args, cfg)
    emit_csv(result, out / cfg.output_csv)
    summary = {
        "scenario": cfg.scenario,
        "paths": result.n_paths,
        "mean_total_pnl": result.mean_total_pnl.tolist(),
        "se_total_pnl": result.se_total_pnl.tolist(),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary))
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _config(args)
    base, grid = _two_agent_base(cfg)
    superior = 1 if base.sigma1 > base.sigma2 else 2
    x = abs(cfg.true_x) if cfg.true_x else 1.0
    gaussian = cfg.model.kind == "gaussian"
    if gaussian:
        ctx = signal_independent_context(base, grid, x, superior)
        values = value_recursion(ctx)
        surface = ctx.gain
    out = _out_dir(args, cfg)
    path = out / "analyze.csv"
    prior = GaussianPosterior(0.0, 1.0)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["auction_index", "last_trade_index", "t", "s", "a", "b", "p_correct_1", "p_correct_2",
                    "h_superior", "adjusted_gain_superior", "value_superior", "policy_superior"])
        for t in range(1, grid.m):
            for s in range(t):
                q = base.at(grid[t], grid[s])
                if gaussian:
                    ab = ab_coefficients(q)
                    p1 = p_correct_gaussian(q, prior, 1).total
                    h = surface(t, s)
                    adj = adjusted_gain(t, s, ctx) if t < grid.m - 1 else float("nan")
                    v, pol = values.value[t, s], int(values.policy[t, s])
                    row = [ab.a, ab.b, p1, 1.0 - p1, h, adj, v, pol]
                else:
                    p1 = p_correct_digital(q, 1)
                    row = [float("nan")] * 2 + [p1, 1.0 - p1] + [float("nan")] * 3 + [0]
                w.writerow([t, s, repr(float(grid[t])), repr(float(grid[s]))] + [repr(float(v)) for v in row[:-1]] + [row[-1]])
    print(str(path))
    return EXIT_OK


def cmd_strategy(args) -> int:
    cfg = _config(args)
    if cfg.model.kind != "gaussian":
        raise ConfigError("payoff.kind: the strategy command needs the gaussian payoff")
    base, grid = _two_agent_base(cfg)
    x = abs(cfg.true_x) if cfg.true_x else 1.0
    report = {}
    out = _out_dir(args, cfg)
    for agent in (1, 2):
        ctx = signal_independent_context(base, grid, x, agent)
        schedule, s = [], 0
        for t in range(1, grid.m):
            trade = decide(t, s, ctx) == "trade"
            schedule.append(trade)
            if trade:
                s = t
        trace = trace_from_schedule(schedule, ctx)
        values = value_recursion(ctx)
        entry = {
            "decisions": list(trace.decisions),
            "rule_expected_profit": trace.expected_profit,
            "recursion_value": values.initial_value,
        }
        if grid.m <= 12:
            best = max(tr.expected_profit for tr in enumerate_strategies(ctx))
            entry["enumeration_best"] = best
            entry["recursion_gap"] = values.initial_value - best
        report[f"agent_{agent}"] = entry
        with (out / f"strategy_agent{agent}.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["auction_index", "t", "last_trade_index", "decision", "h"])
            for k, (d, st) in enumerate(zip(trace.decisions, trace.states)):
                u = k + 1
                w.writerow([u, repr(float(grid[u])), st, d, repr(float(ctx.gain(u, st)))])
    print(json.dumps(report, indent=2))
    return EXIT_OK


def _set_path(raw: dict, dotted: str, value):
    keys = dotted.split(".")
    node = raw
    for key in keys[:-1]:
        node = node[int(key)] if isinstance(node, list) else node.setdefault(key, {})
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value


def cmd_sweep(args) -> int:
    cfg = _config(args)
    values = [json.loads(v) for v in args.values.split(",")]
    out = _out_dir(args, cfg)
    path = out / "sweep.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param", "value", "agent_id", "mean_total_pnl", "se_total_pnl", "mean_trade_freq"])
        for value in values:
            raw = copy.deepcopy(cfg.raw)
            try:
                _set_path(raw, args.param, value)
            except (KeyError, IndexError, ValueError, TypeError):
                raise ConfigError(f"{args.param}: no such parameter") from None
            result = run_experiment(config_from_dict(raw))
            for j in range(result.n_agents):
                w.writerow([args.param, json.dumps(value), j, repr(float(result.mean_total_pnl[j])),
                            repr(float(result.se_total_pnl[j])), repr(float(np.mean(result.trade_freq)))])
    print(str(path))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bridgemarket", description="Sequential auctions driven by Brownian bridge signals.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file (defaults apply when omitted)")
    common.add_argument("--seed", type=int)
    common.add_argument("--paths", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out", help="output directory (overrides output.dir)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="Monte Carlo run, per-auction CSV").set_defaults(func=cmd_simulate)
    sub.add_parser("analyze", parents=[common], help="closed-form quality and gain surfaces").set_defaults(func=cmd_analyze)
    sub.add_parser("strategy", parents=[common], help="decision traces and enumeration check").set_defaults(func=cmd_strategy)
    sweep = sub.add_parser("sweep", parents=[common], help="repeat simulate over one parameter")
    sweep.add_argument("--param", required=True, help="dotted field name, e.g. agents.1.sigma or grid.m")
    sweep.add_argument("--values", required=True, help="comma separated JSON values")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericUnderflowError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
