"""Multi-seed campaigns: train, evaluate on shared episodes, compare.

A campaign trains one model per seed, evaluates every trained model and the
planning baseline on the same fixed episode set, pools the per-seed policy
reports into one, and emits a comparison against the per-episode
perfect-information bound.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..chain import ScenarioSpec, load_scenario
from ..lp import forecast_plan, perfect_information_bound
from ..ppo import PpoHyperparams, load_checkpoint, train
from ..simulator import realize_episode
from .evaluation import (
    EVAL_SEEDS,
    EvalPlan,
    evaluate_agent,
    pool_reports,
    write_eval_csv,
    write_series_csv,
)
from .report import compare_report, write_comparison_csv

TRAIN_SEEDS = (1, 2, 3, 4, 5)

# desk scale fits a workstation session; paper scale reproduces the full runs
PRESETS = {
    "desk": {"seeds": (1,), "total_steps": 500_000},
    "paper": {"seeds": TRAIN_SEEDS, "total_steps": 7_200_000},
}


@dataclass
class CampaignSpec:
    scenario: str
    seeds: tuple = TRAIN_SEEDS
    total_steps: int = 7_200_000
    eval_every: int = 18_000
    eval_episodes: int = 10
    final_env_seeds: tuple = EVAL_SEEDS
    final_episodes_per_seed: int = 10
    hyperparams: PpoHyperparams | None = None

    def validate(self) -> list:
        problems = []
        if len(set(self.seeds)) != len(self.seeds):
            problems.append("training seeds must be distinct")
        if not self.seeds:
            problems.append("at least one training seed required")
        for name in ("total_steps", "eval_every", "eval_episodes",
                     "final_episodes_per_seed"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive")
        if not self.final_env_seeds:
            problems.append("at least one evaluation seed required")
        return problems

    def eval_plan(self) -> EvalPlan:
        return EvalPlan(tuple(self.final_env_seeds), self.final_episodes_per_seed)


def campaign_spec(scenario: str, preset: str = "paper", **overrides) -> CampaignSpec:
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    kwargs = dict(PRESETS[preset])
    kwargs.update(overrides)
    return CampaignSpec(scenario=scenario, **kwargs)


@dataclass
class CampaignRecord:
    spec: CampaignSpec
    seed_results: list = field(default_factory=list)
    reports: dict = field(default_factory=dict)
    per_seed_reports: list = field(default_factory=list)
    bounds: np.ndarray | None = None
    comparison: dict | None = None
    out_dir: str | None = None

    @property
    def failures(self) -> list:
        return [r for r in self.seed_results if r["status"] != "ok"]


def _train_seed(scenario: ScenarioSpec, seed: int, total_steps: int,
                eval_every: int, eval_episodes: int,
                hp: PpoHyperparams | None, seed_dir: str) -> dict:
    """One training run; always returns a record, never raises."""
    try:
        res = train(scenario, seed, total_steps, hp=hp, eval_every=eval_every,
                    eval_episodes=eval_episodes, out_dir=seed_dir)
        return {"seed": seed, "status": "diverged" if res.diverged else "ok",
                "best_cost": res.best_cost, "curve": res.curve,
                "checkpoint": res.checkpoint_path, "wall_time": res.wall_time,
                "error": None}
    except Exception as exc:  # per-seed fault isolation
        return {"seed": seed, "status": "failed", "best_cost": None,
                "curve": [], "checkpoint": None, "wall_time": 0.0,
                "error": f"{type(exc).__name__}: {exc}"}


def run_campaign(spec: CampaignSpec, scenario: ScenarioSpec | None = None,
                 out_dir: str | None = None, include_lp: bool = True,
                 include_bounds: bool = True, workers: int = 1,
                 verbose: bool = False) -> CampaignRecord:
    """Execute the full train / evaluate / compare pipeline.

    The scenario is looked up from the spec's name unless given explicitly.
    A failed or diverged seed is recorded and skipped; the campaign carries
    on with the models that finished.
    """
    problems = spec.validate()
    if problems:
        raise ValueError("invalid campaign spec: " + "; ".join(problems))
    if scenario is None:
        scenario = load_scenario(spec.scenario)
    elif scenario.name != spec.scenario:
        raise ValueError(f"scenario {scenario.name!r} does not match the "
                         f"campaign spec {spec.scenario!r}")

    record = CampaignRecord(spec=spec, out_dir=out_dir)
    tmp = None
    root = out_dir
    if root is None:
        tmp = tempfile.TemporaryDirectory(prefix="chainplan-campaign-")
        root = tmp.name
    os.makedirs(root, exist_ok=True)

    jobs = [(scenario, s, spec.total_steps, spec.eval_every, spec.eval_episodes,
             spec.hyperparams, os.path.join(root, f"seed_{s}")) for s in spec.seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            record.seed_results = list(pool.map(_train_seed, *zip(*jobs)))
    else:
        record.seed_results = [_train_seed(*job) for job in jobs]

    plan = spec.eval_plan()
    for res in record.seed_results:
        if verbose:
            print(f"seed {res['seed']}: {res['status']}"
                  + (f" best {res['best_cost']:,.0f}" if res["best_cost"] else ""))
        if res["status"] != "ok":
            continue
        bundle = load_checkpoint(res["checkpoint"])
        rep = evaluate_agent(bundle, scenario, plan,
                             agent_id=f"ppo_seed{res['seed']}")
        record.per_seed_reports.append(rep)
    if record.per_seed_reports:
        record.reports["ppo"] = pool_reports(record.per_seed_reports, "ppo")

    if include_lp:
        record.reports["lp"] = evaluate_agent(forecast_plan(scenario), scenario,
                                              plan, agent_id="lp")
    if include_bounds:
        record.bounds = np.array([
            perfect_information_bound(scenario, realize_episode(scenario, s))
            for s in plan.episode_seeds()])

    if record.reports:
        record.comparison = compare_report(record.reports, record.bounds)

    if out_dir is not None:
        _write_outputs(record, out_dir)
    if tmp is not None:
        tmp.cleanup()
    return record


def _write_outputs(record: CampaignRecord, out_dir: str):
    reports = list(record.per_seed_reports)
    if "lp" in record.reports:
        reports.append(record.reports["lp"])
    if reports:
        write_eval_csv(reports, os.path.join(out_dir, "evaluation.csv"))
    for name, report in record.reports.items():
        write_series_csv(report, os.path.join(out_dir, f"series_{name}.csv"))
    if record.comparison is not None:
        write_comparison_csv(record.comparison, os.path.join(out_dir, "comparison.csv"))
    if record.bounds is not None:
        plan = record.spec.eval_plan()
        with open(os.path.join(out_dir, "bounds.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            fh.write("# chainplan bounds v1: per-episode perfect-information optimum\n")
            writer = csv.writer(fh)
            writer.writerow(["scenario", "episode_id", "episode_seed", "bound"])
            for e, (s, b) in enumerate(zip(plan.episode_seeds(), record.bounds)):
                writer.writerow([record.spec.scenario, e, s, f"{b:.6f}"])
    summary = {
        "scenario": record.spec.scenario,
        "seeds": list(record.spec.seeds),
        "total_steps": record.spec.total_steps,
        "seed_results": [{k: v for k, v in r.items() if k != "curve"}
                         for r in record.seed_results],
        "agents": {name: {"episodes": rep.n_episodes, "mean": rep.mean,
                          "std": rep.std}
                   for name, rep in record.reports.items()},
        "bound_mean": None if record.bounds is None else float(record.bounds.mean()),
        "gain_pct": None if not record.comparison else record.comparison.get("gain_pct"),
    }
    with open(os.path.join(out_dir, "campaign.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
