"""Shared-episode evaluation of planning agents.

Every agent is scored on the exact same episode realizations: a fixed,
published list of environment seeds, each expanded into a block of episode
seeds by substream indexing. Reports carry realization digests so that any
cross-agent comparison can verify it pooled identical episodes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..chain import ScenarioSpec
from ..lp import LpPlan
from ..simulator import COST_TYPES, SupplyChainEnv
from ..stochastic import derive_seed

# fixed published evaluation seeds; reports are comparable across runs and
# machines only because this list never changes
EVAL_SEEDS = (101, 102, 103, 104, 105, 106, 107, 108, 109, 110)

# cost column order used by every CSV this package writes
COST_COLUMNS = ("production", "processing", "transport", "stock",
                "excess_penalty", "unmet_penalty")
_COST_KEYS = dict(zip(COST_COLUMNS, COST_TYPES))

# per-step series captured from episode traces
SERIES_NAMES = ("stock", "production", "transport", "unmet", "demand")


@dataclass(frozen=True)
class EvalPlan:
    """Which episodes to run: env seeds x episodes per seed."""

    env_seeds: tuple = EVAL_SEEDS
    episodes_per_seed: int = 10

    def episode_seeds(self) -> list:
        return [derive_seed(int(env_seed), k)
                for env_seed in self.env_seeds
                for k in range(self.episodes_per_seed)]

    @property
    def n_episodes(self) -> int:
        return len(self.env_seeds) * self.episodes_per_seed


@dataclass
class EvalReport:
    """Per-episode costs plus per-step aggregates for one agent."""

    agent: str
    scenario: str
    episode_seeds: list
    digests: list
    costs: np.ndarray               # (n_episodes,)
    breakdown: np.ndarray           # (n_episodes, len(COST_TYPES))
    series_sum: dict = field(default_factory=dict)    # name -> (h, k)
    series_sumsq: dict = field(default_factory=dict)  # name -> (h, k)
    series_labels: dict = field(default_factory=dict)  # name -> tuple of k labels

    @property
    def n_episodes(self) -> int:
        return len(self.costs)

    @property
    def mean(self) -> float:
        return float(self.costs.mean())

    @property
    def std(self) -> float:
        return float(self.costs.std())

    def breakdown_means(self) -> dict:
        means = self.breakdown.mean(axis=0)
        return {name: float(means[i]) for i, name in enumerate(COST_TYPES)}

    def series_mean(self, name: str) -> np.ndarray:
        return self.series_sum[name] / self.n_episodes

    def series_std(self, name: str) -> np.ndarray:
        m = self.series_mean(name)
        var = self.series_sumsq[name] / self.n_episodes - m * m
        return np.sqrt(np.maximum(var, 0.0))

    def validate(self, plan: EvalPlan | None = None) -> list:
        problems = []
        if plan is not None and self.n_episodes != plan.n_episodes:
            problems.append(f"episode count {self.n_episodes} != plan {plan.n_episodes}")
        if self.n_episodes:
            lo, hi = self.costs.min(), self.costs.max()
            # summation round-off can push the mean an ulp past identical
            # endpoints, so the window gets a relative guard band
            slack = 1e-9 * max(abs(lo), abs(hi), 1.0)
            if not lo - slack <= self.mean <= hi + slack:
                problems.append("mean outside [min, max] of episodes")
        if self.breakdown.shape != (self.n_episodes, len(COST_TYPES)):
            problems.append("breakdown shape mismatch")
        return problems


def _policy_for(agent, env: SupplyChainEnv):
    """Map an agent object to a step function on physical observations."""
    if isinstance(agent, LpPlan):
        if agent.scenario != env.scenario.name:
            raise ValueError(f"plan was built for scenario {agent.scenario!r}, "
                             f"env runs {env.scenario.name!r}")

        def lp_step(obs):
            t = env.state.t + 1
            return env.step_plan(*agent.quantities_for(t))
        return lp_step
    if hasattr(agent, "policy"):  # trained policy bundle
        if agent.obs_dim != env.codec.obs_dim or agent.act_dim != env.codec.action_dim:
            raise ValueError("policy dimensions do not match the scenario's chain")
        act = agent.policy(env.codec)
        return lambda obs: env.step(act(obs))
    if callable(agent):  # plain policy: physical obs -> action vector
        return lambda obs: env.step(agent(obs))
    raise TypeError(f"cannot evaluate agent of type {type(agent).__name__}")


def _series_labels(env: SupplyChainEnv) -> dict:
    chain = env.chain
    names = chain.node_names
    return {
        "stock": tuple(names),
        "production": tuple(names[int(s)] for s in chain.suppliers),
        "transport": tuple(f"{names[src]}_to_{names[dst]}" for src, dst in chain.links),
        "unmet": tuple(names[int(r)] for r in chain.retailers),
        "demand": tuple(names[int(r)] for r in chain.retailers),
    }


def evaluate_agent(agent, scenario: ScenarioSpec, plan: EvalPlan | None = None,
                   agent_id: str | None = None) -> EvalReport:
    """Run the shared episode set and aggregate costs and traces.

    Policy bundles act through their deterministic mean; plans are replayed
    step by step with availability truncation and the codec round trip.
    """
    plan = plan or EvalPlan()
    env = SupplyChainEnv(scenario, tracing=True)
    step = _policy_for(agent, env)
    h = scenario.chain.horizon
    labels = _series_labels(env)
    widths = {name: len(lab) for name, lab in labels.items()}
    series_sum = {n: np.zeros((h, widths[n])) for n in SERIES_NAMES}
    series_sumsq = {n: np.zeros((h, widths[n])) for n in SERIES_NAMES}

    seeds = plan.episode_seeds()
    costs = np.empty(len(seeds))
    breakdown = np.empty((len(seeds), len(COST_TYPES)))
    digests = []
    for e, seed in enumerate(seeds):
        obs = env.reset(int(seed))
        digests.append(env.realization.digest())
        done = False
        while not done:
            out = step(obs)
            obs = out.observation
            done = out.done
        costs[e] = env.total_cost
        breakdown[e] = [env.episode_costs[k] for k in COST_TYPES]
        for i, rec in enumerate(env.trace_records):
            row = {
                "stock": rec["stocks_end"],
                "production": rec["production"],
                "transport": rec["shipped_units"],
                "unmet": rec["unmet"],
                "demand": rec["demand"],
            }
            for name, values in row.items():
                series_sum[name][i] += values
                series_sumsq[name][i] += values * values

    if agent_id is None:
        agent_id = "lp" if isinstance(agent, LpPlan) else "ppo"
    report = EvalReport(agent=agent_id, scenario=scenario.name,
                        episode_seeds=list(seeds), digests=digests,
                        costs=costs, breakdown=breakdown,
                        series_sum=series_sum, series_sumsq=series_sumsq,
                        series_labels=labels)
    problems = report.validate(plan)
    if problems:
        raise RuntimeError("inconsistent evaluation report: " + "; ".join(problems))
    return report


def pool_reports(reports: list, agent_id: str | None = None) -> EvalReport:
    """Concatenate several reports over the same episode set (multi-seed
    models of one agent). Per-step statistics pool across all episodes."""
    if not reports:
        raise ValueError("no reports to pool")
    first = reports[0]
    base = set(first.digests)
    for r in reports[1:]:
        if r.scenario != first.scenario:
            raise ValueError("cannot pool reports from different scenarios")
        if set(r.digests) != base:
            raise ValueError("cannot pool reports over different episode sets")
    series_sum = {n: sum(r.series_sum[n] for r in reports) for n in SERIES_NAMES}
    series_sumsq = {n: sum(r.series_sumsq[n] for r in reports) for n in SERIES_NAMES}
    return EvalReport(
        agent=agent_id or first.agent,
        scenario=first.scenario,
        episode_seeds=[s for r in reports for s in r.episode_seeds],
        digests=[d for r in reports for d in r.digests],
        costs=np.concatenate([r.costs for r in reports]),
        breakdown=np.concatenate([r.breakdown for r in reports]),
        series_sum=series_sum, series_sumsq=series_sumsq,
        series_labels=first.series_labels,
    )


def write_eval_csv(reports: list, path: str):
    """One row per (agent, episode) with the total and per-type costs."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# chainplan evaluation v1: per-episode costs; "
                 "episode_id indexes the shared evaluation episode set\n")
        writer = csv.writer(fh)
        writer.writerow(["scenario", "agent", "episode_id", "episode_seed",
                         "total_cost"] + [f"cost_{c}" for c in COST_COLUMNS])
        for report in reports:
            idx = {k: i for i, k in enumerate(COST_TYPES)}
            for e in range(report.n_episodes):
                row = [report.scenario, report.agent, e, report.episode_seeds[e],
                       f"{report.costs[e]:.6f}"]
                row += [f"{report.breakdown[e, idx[_COST_KEYS[c]]]:.6f}"
                        for c in COST_COLUMNS]
                writer.writerow(row)


def write_series_csv(report: EvalReport, path: str):
    """Per-step mean and std of stocks, production, transport, unmet demand
    and demand, averaged over the report's episodes."""
    header = ["step"]
    blocks = []
    for name in SERIES_NAMES:
        mean = report.series_mean(name)
        std = report.series_std(name)
        for j, label in enumerate(report.series_labels[name]):
            header += [f"{name}_{label}_mean", f"{name}_{label}_std"]
            blocks.append((mean[:, j], std[:, j]))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# chainplan step-series v1: agent={report.agent} "
                 f"scenario={report.scenario} episodes={report.n_episodes}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        h = next(iter(report.series_sum.values())).shape[0]
        for i in range(h):
            row = [i + 1]
            for m, s in blocks:
                row += [f"{m[i]:.6f}", f"{s[i]:.6f}"]
            writer.writerow(row)
