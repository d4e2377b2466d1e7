"""Cross-agent comparison tables over a shared evaluation episode set."""

from __future__ import annotations

import csv

import numpy as np

from .evaluation import EvalReport
from .stats import bootstrap_ci


def gain_percent(baseline_mean: float, candidate_mean: float) -> float:
    """Cost reduction of the candidate relative to the baseline, in percent.

    Positive when the candidate is cheaper; sign is preserved when it is
    more expensive.
    """
    if baseline_mean == 0:
        raise ValueError("baseline mean of 0 admits no percentage gain")
    return 100.0 * (baseline_mean - candidate_mean) / baseline_mean


def compare_report(reports: dict, bounds=None, baseline: str = "lp",
                   candidate: str = "ppo", ci_iterations: int = 10_000) -> dict:
    """Comparison table for one scenario: per-agent mean/std/CI rows, the
    per-episode lower bound when given, and the candidate's gain over the
    baseline.

    All reports must cover the same episode set (checked via realization
    digests); pooled multi-model reports repeat the set a whole number of
    times, which is allowed.
    """
    if not reports:
        raise ValueError("no reports to compare")
    items = list(reports.values())
    scenario = items[0].scenario
    base_digests = set(items[0].digests)
    for r in items[1:]:
        if r.scenario != scenario:
            raise ValueError("reports mix scenarios "
                             f"{scenario!r} and {r.scenario!r}")
        if set(r.digests) != base_digests:
            raise ValueError(f"agent {r.agent!r} was evaluated on a different "
                             "episode set (realization digests differ)")

    rows = []
    if bounds is not None:
        bounds = np.asarray(bounds, dtype=np.float64)
        lo, hi = bootstrap_ci(bounds, ci_iterations)
        rows.append({"agent": "bound", "episodes": int(bounds.size),
                     "mean": float(bounds.mean()), "std": float(bounds.std()),
                     "ci_low": lo, "ci_high": hi})
    for name, report in reports.items():
        lo, hi = bootstrap_ci(report.costs, ci_iterations)
        rows.append({"agent": name, "episodes": report.n_episodes,
                     "mean": report.mean, "std": report.std,
                     "ci_low": lo, "ci_high": hi})

    table = {"scenario": scenario, "rows": rows}
    if baseline in reports and candidate in reports:
        base_mean = reports[baseline].mean
        cand_mean = reports[candidate].mean
        table["baseline"] = baseline
        table["candidate"] = candidate
        table["gain"] = base_mean - cand_mean
        table["gain_pct"] = gain_percent(base_mean, cand_mean)
    return table


def write_comparison_csv(table: dict, path: str):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# chainplan comparison v1: per-agent cost summary; gain "
                 "columns are filled on the candidate agent's row\n")
        writer = csv.writer(fh)
        writer.writerow(["scenario", "agent", "episodes", "mean_cost",
                         "std_cost", "ci_low", "ci_high", "gain", "gain_pct"])
        for row in table["rows"]:
            gain = gain_pct = ""
            if row["agent"] == table.get("candidate"):
                gain = f"{table['gain']:.6f}"
                gain_pct = f"{table['gain_pct']:.1f}"
            writer.writerow([table["scenario"], row["agent"], row["episodes"],
                             f"{row['mean']:.6f}", f"{row['std']:.6f}",
                             f"{row['ci_low']:.6f}", f"{row['ci_high']:.6f}",
                             gain, gain_pct])
