"""Command-line workbench for the supply-chain planner.

Subcommands cover the whole workflow: inspecting scenarios, dumping demand
traces, solving the planning LPs, training a policy, evaluating agents on
the shared episode set, hyperparameter tuning, comparison reports, and full
multi-seed campaigns. Every CSV starts with a versioned header comment row
describing its schema.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from .chain import SCENARIO_NAMES, get_scenario, load_scenario, scenario_to_ini
from .harness import (
    EVAL_SEEDS,
    PRESETS,
    EvalPlan,
    campaign_spec,
    compare_report,
    evaluate_agent,
    pool_reports,
    random_search_tune,
    run_campaign,
    write_comparison_csv,
    write_eval_csv,
    write_series_csv,
)
from .lp import (
    build_lp,
    forecast_plan,
    forecast_tables,
    perfect_information_bound,
    solve_lp,
    write_lp_text,
)
from .ppo import PpoHyperparams, load_checkpoint, train
from .simulator import realize_episode
from .stochastic import demand_series


def _load_hyperparams(path: str | None) -> PpoHyperparams | None:
    """Read hyperparams from a JSON file; accepts the tuner's output format."""
    if path is None:
        return None
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if "hyperparams" in data:
        data = data["hyperparams"]
    return PpoHyperparams.from_dict(data)


def _resolve_agent(token: str, scenario):
    """Map an agent token to an evaluable object: 'lp' or a checkpoint path."""
    if token == "lp":
        return forecast_plan(scenario), "lp"
    bundle = load_checkpoint(token)
    return bundle, None


def _eval_plan(args) -> EvalPlan:
    seeds = tuple(args.seeds) if args.seeds else EVAL_SEEDS
    return EvalPlan(env_seeds=seeds, episodes_per_seed=args.episodes_per_seed)


def _out_fh(path: str | None):
    return open(path, "w", newline="", encoding="utf-8") if path else sys.stdout


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def cmd_scenario_list(args) -> int:
    print(f"{'name':<10} {'demand':<26} {'lead times':<22} stock costs")
    for name in SCENARIO_NAMES:
        spec = get_scenario(name)
        d, lt = spec.demand, spec.lead_time
        if d.kind == "seasonal":
            dtxt = f"seasonal {d.sin_min:g}-{d.sin_max:g}"
        else:
            dtxt = f"regular level {d.level:g}"
        if d.perturbation == "gaussian":
            dtxt += f" +N(0,{d.sigma:g})"
        elif d.perturbation == "uniform":
            dtxt += f" +U({d.low:g},{d.high:g})"
        ltxt = ("constant" if lt.kind == "constant"
                else f"stochastic avg {lt.average:g} max {lt.maximum}")
        stxt = ",".join(f"{c:g}" for c in spec.chain.stock_cost)
        print(f"{name:<10} {dtxt:<26} {ltxt:<22} {stxt}")
    return 0


def cmd_scenario_dump(args) -> int:
    spec = load_scenario(args.scenario)
    text = scenario_to_ini(spec)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_demand_trace(args) -> int:
    spec = load_scenario(args.scenario)
    steps = args.steps or spec.chain.horizon
    retailers = spec.chain.retailers
    series = demand_series(spec.demand, args.seed, retailers,
                           np.arange(1, steps + 1))
    names = spec.chain.node_names
    fh = _out_fh(args.out)
    try:
        fh.write(f"# chainplan demand-trace v1: scenario={spec.name} "
                 f"seed={args.seed}; one row per step and retailer\n")
        writer = csv.writer(fh)
        writer.writerow(["step", "retailer", "demand"])
        for i in range(steps):
            for j, r in enumerate(retailers):
                writer.writerow([i + 1, names[int(r)], f"{series[i, j]:.6f}"])
    finally:
        if fh is not sys.stdout:
            fh.close()
            print(f"wrote {args.out}")
    return 0


def write_plan_csv(plan, scenario, path: str | None):
    chain = scenario.chain
    names = chain.node_names
    header = (["step"]
              + [f"produce_{names[int(s)]}" for s in chain.suppliers]
              + [f"ship_{names[src]}_to_{names[dst]}" for src, dst in chain.links])
    fh = _out_fh(path)
    try:
        fh.write("# chainplan plan v1: dispatch quantities per step; shipments "
                 "in the source node's stock units\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(1, chain.horizon + 1):
            production, shipments = plan.quantities_for(t)
            writer.writerow([t] + [f"{v:.6f}" for v in production]
                            + [f"{v:.6f}" for v in shipments])
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_lp_solve(args) -> int:
    spec = load_scenario(args.scenario)
    instance = build_lp(spec, *forecast_tables(spec))
    t0 = time.time()
    solution = solve_lp(instance)
    dt = time.time() - t0
    n_vars = instance.c.size
    n_rows = instance.a_ub.shape[0] + instance.a_eq.shape[0]
    print(f"scenario {spec.name}: {solution.status} in {dt:.2f}s "
          f"({n_vars} variables, {n_rows} constraints)")
    if solution.status != "optimal":
        return 1
    print(f"objective {solution.objective:,.2f}")
    if args.out:
        write_lp_text(instance, args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_lp_plan(args) -> int:
    spec = load_scenario(args.scenario)
    plan = forecast_plan(spec)
    print(f"scenario {spec.name}: planned objective {plan.objective:,.2f}")
    write_plan_csv(plan, spec, args.out)
    if args.out:
        print(f"wrote {args.out}")
    return 0


def cmd_lp_bounds(args) -> int:
    spec = load_scenario(args.scenario)
    plan = _eval_plan(args)
    seeds = plan.episode_seeds()
    bounds = []
    t0 = time.time()
    for s in seeds:
        bounds.append(perfect_information_bound(spec, realize_episode(spec, s)))
    bounds = np.array(bounds)
    print(f"{len(bounds)} episodes in {time.time() - t0:.1f}s: "
          f"bound mean {bounds.mean():,.2f} std {bounds.std():,.2f}")
    fh = _out_fh(args.out)
    try:
        fh.write("# chainplan bounds v1: per-episode perfect-information optimum\n")
        writer = csv.writer(fh)
        writer.writerow(["scenario", "episode_id", "episode_seed", "bound"])
        for e, (s, b) in enumerate(zip(seeds, bounds)):
            writer.writerow([spec.name, e, s, f"{b:.6f}"])
    finally:
        if fh is not sys.stdout:
            fh.close()
            print(f"wrote {args.out}")
    return 0


def cmd_train(args) -> int:
    spec = load_scenario(args.scenario)
    steps = args.steps or PRESETS[args.preset]["total_steps"]
    hp = _load_hyperparams(args.hyperparams)
    print(f"training on {spec.name}: seed {args.seed}, {steps:,} steps -> {args.out}")
    res = train(spec, args.seed, steps, hp=hp, eval_every=args.eval_every,
                eval_episodes=args.eval_episodes, out_dir=args.out, verbose=True)
    status = "diverged" if res.diverged else "done"
    print(f"{status} in {res.wall_time / 60:.1f} min: best eval cost "
          f"{res.best_cost:,.2f} over {len(res.curve)} evaluations")
    print(f"checkpoint {res.checkpoint_path}")
    return 1 if res.diverged else 0


def cmd_evaluate(args) -> int:
    spec = load_scenario(args.scenario)
    agent, default_id = _resolve_agent(args.agent, spec)
    agent_id = args.agent_id or default_id or "ppo"
    plan = _eval_plan(args)
    t0 = time.time()
    report = evaluate_agent(agent, spec, plan, agent_id=agent_id)
    print(f"{agent_id} on {spec.name}: {report.n_episodes} episodes "
          f"in {time.time() - t0:.1f}s")
    print(f"total cost mean {report.mean:,.2f} std {report.std:,.2f}")
    for name, value in report.breakdown_means().items():
        print(f"  {name:<12} {value:>16,.2f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_eval_csv([report], os.path.join(args.out, "evaluation.csv"))
        write_series_csv(report, os.path.join(args.out, f"series_{agent_id}.csv"))
        print(f"wrote {args.out}/evaluation.csv and series_{agent_id}.csv")
    return 0


def cmd_tune(args) -> int:
    spec = load_scenario(args.scenario)
    res = random_search_tune(spec, trials=args.trials, total_steps=args.steps,
                             eval_every=args.eval_every,
                             eval_episodes=args.eval_episodes, seed=args.seed,
                             out_dir=args.out, verbose=True)
    print(f"best trial {res.best_trial}: cost {res.best_cost:,.2f}")
    for key, value in res.best_hyperparams.to_dict().items():
        print(f"  {key:<18} {value}")
    if args.out:
        print(f"wrote {args.out}/trials.csv and best_hyperparams.json")
    return 0


def cmd_report(args) -> int:
    spec = load_scenario(args.scenario)
    plan = _eval_plan(args)
    reports = {}
    per_seed = []
    if not args.no_lp:
        reports["lp"] = evaluate_agent(forecast_plan(spec), spec, plan, agent_id="lp")
    for i, path in enumerate(args.checkpoints or []):
        bundle = load_checkpoint(path)
        per_seed.append(evaluate_agent(bundle, spec, plan, agent_id=f"ppo_model{i}"))
    if per_seed:
        reports["ppo"] = pool_reports(per_seed, "ppo")
    if not reports:
        print("nothing to report: no checkpoints given and the planning "
              "baseline is disabled", file=sys.stderr)
        return 2
    bounds = None
    if not args.no_bounds:
        bounds = np.array([perfect_information_bound(spec, realize_episode(spec, s))
                           for s in plan.episode_seeds()])
    table = compare_report(reports, bounds)
    print(f"{'agent':<8} {'episodes':>8} {'mean':>16} {'std':>14} "
          f"{'ci_low':>16} {'ci_high':>16}")
    for row in table["rows"]:
        print(f"{row['agent']:<8} {row['episodes']:>8} {row['mean']:>16,.2f} "
              f"{row['std']:>14,.2f} {row['ci_low']:>16,.2f} {row['ci_high']:>16,.2f}")
    if "gain_pct" in table:
        print(f"gain of {table['candidate']} over {table['baseline']}: "
              f"{table['gain']:,.2f} ({table['gain_pct']:.1f}%)")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_comparison_csv(table, os.path.join(args.out, "comparison.csv"))
        write_eval_csv(list(reports.values()) + per_seed,
                       os.path.join(args.out, "evaluation.csv"))
        print(f"wrote {args.out}/comparison.csv and evaluation.csv")
    return 0


def cmd_campaign(args) -> int:
    overrides = {}
    if args.seeds:
        overrides["seeds"] = tuple(args.seeds)
    if args.steps:
        overrides["total_steps"] = args.steps
    hp = _load_hyperparams(args.hyperparams)
    if hp is not None:
        overrides["hyperparams"] = hp
    spec = campaign_spec(args.scenario, preset=args.preset, **overrides)
    print(f"campaign on {spec.scenario}: seeds {spec.seeds}, "
          f"{spec.total_steps:,} steps each -> {args.out}")
    record = run_campaign(spec, out_dir=args.out, workers=args.workers,
                          verbose=True)
    for res in record.failures:
        print(f"seed {res['seed']}: {res['status']}"
              + (f" ({res['error']})" if res["error"] else ""))
    if record.comparison:
        for row in record.comparison["rows"]:
            print(f"{row['agent']:<8} mean {row['mean']:>16,.2f} "
                  f"std {row['std']:>14,.2f}")
        if "gain_pct" in record.comparison:
            print(f"gain: {record.comparison['gain_pct']:.1f}%")
    return 0 if not record.failures else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_eval_plan_flags(p):
    p.add_argument("--seeds", type=int, nargs="+", metavar="SEED",
                   help="evaluation environment seeds (default: the fixed list)")
    p.add_argument("--episodes-per-seed", type=int, default=10,
                   help="episodes per environment seed (default 10)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chainplan",
        description="Supply-chain production planning workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p_scen = sub.add_parser("scenario", help="inspect the scenario catalog")
    scen_sub = p_scen.add_subparsers(dest="action", required=True)
    p = scen_sub.add_parser("list", help="list all catalog scenarios")
    p.set_defaults(func=cmd_scenario_list)
    p = scen_sub.add_parser("dump", help="dump one scenario as INI text")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", help="write to file instead of stdout")
    p.set_defaults(func=cmd_scenario_dump)

    p = sub.add_parser("demand-trace", help="sample a demand trace as CSV")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, help="steps to sample (default: horizon)")
    p.add_argument("--out", help="write to file instead of stdout")
    p.set_defaults(func=cmd_demand_trace)

    p_lp = sub.add_parser("lp", help="deterministic planning LPs")
    lp_sub = p_lp.add_subparsers(dest="action", required=True)
    p = lp_sub.add_parser("solve", help="solve the forecast LP")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", help="export the model as LP-format text")
    p.set_defaults(func=cmd_lp_solve)
    p = lp_sub.add_parser("plan", help="extract the forecast plan schedule")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", help="write the schedule CSV to a file")
    p.set_defaults(func=cmd_lp_plan)
    p = lp_sub.add_parser("bounds", help="perfect-information bounds per episode")
    p.add_argument("--scenario", required=True)
    _add_eval_plan_flags(p)
    p.add_argument("--out", help="write the bounds CSV to a file")
    p.set_defaults(func=cmd_lp_bounds)

    p = sub.add_parser("train", help="train a policy on one scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--steps", type=int,
                   help="environment steps (default: preset's)")
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.add_argument("--eval-every", type=int, default=18_000)
    p.add_argument("--eval-episodes", type=int, default=10)
    p.add_argument("--hyperparams", help="JSON file with hyperparameter overrides")
    p.add_argument("--out", required=True, help="directory for checkpoints and curve")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate an agent on shared episodes")
    p.add_argument("--scenario", required=True)
    p.add_argument("--agent", default="lp",
                   help="'lp' or a policy checkpoint path (default lp)")
    p.add_argument("--agent-id", help="label for report rows")
    _add_eval_plan_flags(p)
    p.add_argument("--out", help="directory for evaluation and series CSVs")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tune", help="random-search hyperparameter tuning")
    p.add_argument("--scenario", required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--steps", type=int, default=40_960,
                   help="training budget per trial")
    p.add_argument("--eval-every", type=int, default=8_192)
    p.add_argument("--eval-episodes", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for trials.csv and best params")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("report", help="compare agents against the bound")
    p.add_argument("--scenario", required=True)
    p.add_argument("--checkpoints", nargs="*", metavar="CKPT",
                   help="policy checkpoints to pool into the ppo row")
    p.add_argument("--no-lp", action="store_true",
                   help="skip the planning baseline")
    p.add_argument("--no-bounds", action="store_true",
                   help="skip the perfect-information bounds")
    _add_eval_plan_flags(p)
    p.add_argument("--out", help="directory for comparison CSVs")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("campaign", help="full multi-seed train/evaluate/report run")
    p.add_argument("--scenario", required=True)
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.add_argument("--seeds", type=int, nargs="+", help="override training seeds")
    p.add_argument("--steps", type=int, help="override steps per seed")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel training processes")
    p.add_argument("--hyperparams", help="JSON file with hyperparameter overrides")
    p.add_argument("--out", required=True, help="campaign output directory")
    p.set_defaults(func=cmd_campaign)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (KeyError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
