"""Random-search hyperparameter tuning with median pruning.

Each trial draws a configuration from the published search space, trains
with periodic evaluations, and is stopped early when its best intermediate
cost is worse than the median of what earlier trials had achieved by the
same checkpoint. The shipped defaults stay fixed; tuning only reports what
it found.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field, replace
from statistics import median

import numpy as np

from ..chain import ScenarioSpec
from ..ppo import PpoHyperparams, train
from ..stochastic import derive_seed

# sampling domains: ("categorical", choices), ("uniform", (lo, hi)) or
# ("loguniform", (lo, hi)); entries map 1:1 onto PpoHyperparams fields
SEARCH_SPACE = {
    "rollout_steps": ("categorical", [2 ** k for k in range(5, 12)]),
    "epochs": ("categorical", [3, 5, 10, 20]),
    "minibatch_size": ("categorical", [64, 128, 256, 512]),
    "vf_coef": ("uniform", (0.0, 1.0)),
    "clip_range": ("categorical", [0.1, 0.2, 0.3]),
    "gae_lambda": ("categorical", [0.9, 0.92, 0.95, 0.98, 1.0]),
    "gamma": ("categorical", [0.95, 0.98, 0.99, 0.995, 0.999, 0.9999]),
    "hidden": ("categorical", [(64, 64), (128, 128), (256, 256)]),
    "learning_rate": ("loguniform", (1e-5, 1e-2)),
    "activation": ("categorical", ["relu", "tanh"]),
    "max_grad_norm": ("categorical",
                      [0.3, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 2.0, 5.0]),
}


def sample_hyperparams(rng: np.random.Generator,
                       space: dict | None = None,
                       base: PpoHyperparams | None = None) -> PpoHyperparams:
    """One random draw from the search space, on top of the fixed fields."""
    space = space or SEARCH_SPACE
    hp = base or PpoHyperparams()
    draws = {}
    for name, (kind, domain) in space.items():
        if kind == "categorical":
            draws[name] = domain[int(rng.integers(len(domain)))]
        elif kind == "uniform":
            lo, hi = domain
            draws[name] = float(rng.uniform(lo, hi))
        elif kind == "loguniform":
            lo, hi = domain
            draws[name] = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        else:
            raise ValueError(f"unknown sampling kind {kind!r} for {name!r}")
    return replace(hp, **draws)


@dataclass
class TrialRecord:
    index: int
    hyperparams: PpoHyperparams
    status: str = "pending"          # completed | pruned | failed
    score: float | None = None       # best evaluation cost reached
    checkpoints: list = field(default_factory=list)  # (checkpoint, best so far)
    error: str | None = None


@dataclass
class TuneResult:
    best_hyperparams: PpoHyperparams
    best_cost: float
    best_trial: int
    trials: list


def random_search_tune(scenario: ScenarioSpec, trials: int = 100,
                       total_steps: int = 40_960, eval_every: int = 8_192,
                       eval_episodes: int = 3, seed: int = 0,
                       space: dict | None = None, out_dir: str | None = None,
                       verbose: bool = False) -> TuneResult:
    """Random search over the hyperparameter space with median pruning.

    A trial is pruned at a checkpoint when its best cost so far is worse
    than the median of earlier trials' bests at that same checkpoint.
    Returns the best completed trial's hyperparams (falling back to pruned
    trials only if nothing completed).
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    sampler = np.random.default_rng(np.random.PCG64(derive_seed(seed, 30)))
    history: dict = {}  # checkpoint index -> bests of earlier trials
    records = []

    for i in range(trials):
        hp = sample_hyperparams(sampler, space)
        rec = TrialRecord(index=i, hyperparams=hp)
        intermediate = []
        best_so_far = [np.inf]

        def prune_check(curve_row):
            k = curve_row["env_steps"] // eval_every
            best_so_far[0] = min(best_so_far[0], curve_row["eval_mean_cost"])
            intermediate.append((k, best_so_far[0]))
            prior = history.get(k)
            return bool(prior) and best_so_far[0] > median(prior)

        try:
            res = train(scenario, derive_seed(seed, 31, i), total_steps, hp=hp,
                        eval_every=eval_every, eval_episodes=eval_episodes,
                        callback=prune_check)
            if res.diverged:
                rec.status, rec.error = "failed", "training diverged"
            elif res.stopped:
                rec.status, rec.score = "pruned", best_so_far[0]
            else:
                rec.status, rec.score = "completed", res.best_cost
        except Exception as exc:  # trial fault isolation
            rec.status, rec.error = "failed", f"{type(exc).__name__}: {exc}"
        rec.checkpoints = intermediate
        for k, b in intermediate:
            history.setdefault(k, []).append(b)
        records.append(rec)
        if verbose:
            score = f"{rec.score:,.0f}" if rec.score is not None else "-"
            print(f"trial {i:>3}: {rec.status:<9} score {score}")

    completed = [r for r in records if r.status == "completed"]
    candidates = completed or [r for r in records if r.status == "pruned"]
    if not candidates:
        raise RuntimeError("all tuning trials failed")
    best = min(candidates, key=lambda r: r.score)
    result = TuneResult(best_hyperparams=best.hyperparams,
                        best_cost=float(best.score),
                        best_trial=best.index, trials=records)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_trials_csv(records, os.path.join(out_dir, "trials.csv"))
        with open(os.path.join(out_dir, "best_hyperparams.json"), "w",
                  encoding="utf-8") as fh:
            json.dump({"trial": best.index, "cost": result.best_cost,
                       "hyperparams": best.hyperparams.to_dict()}, fh, indent=2)
    return result


def write_trials_csv(records: list, path: str):
    tuned = list(SEARCH_SPACE)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# chainplan tuning v1: one row per trial; score is the "
                 "best evaluation cost the trial reached\n")
        writer = csv.writer(fh)
        writer.writerow(["trial", "status", "score", "checkpoints"] + tuned)
        for rec in records:
            hp = rec.hyperparams.to_dict()
            writer.writerow([rec.index, rec.status,
                             "" if rec.score is None else f"{rec.score:.6f}",
                             len(rec.checkpoints)]
                            + [hp[name] for name in tuned])
