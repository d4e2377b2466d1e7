"""Experiment harness: shared-episode evaluation, statistics, campaigns."""

from .campaign import (
    PRESETS,
    TRAIN_SEEDS,
    CampaignRecord,
    CampaignSpec,
    campaign_spec,
    run_campaign,
)
from .evaluation import (
    COST_COLUMNS,
    EVAL_SEEDS,
    EvalPlan,
    EvalReport,
    evaluate_agent,
    pool_reports,
    write_eval_csv,
    write_series_csv,
)
from .report import compare_report, gain_percent, write_comparison_csv
from .stats import bootstrap_ci
from .tuning import (
    SEARCH_SPACE,
    TrialRecord,
    TuneResult,
    random_search_tune,
    sample_hyperparams,
    write_trials_csv,
)

__all__ = [
    "COST_COLUMNS",
    "EVAL_SEEDS",
    "PRESETS",
    "SEARCH_SPACE",
    "TRAIN_SEEDS",
    "CampaignRecord",
    "CampaignSpec",
    "EvalPlan",
    "EvalReport",
    "TrialRecord",
    "TuneResult",
    "bootstrap_ci",
    "campaign_spec",
    "compare_report",
    "evaluate_agent",
    "gain_percent",
    "pool_reports",
    "random_search_tune",
    "run_campaign",
    "sample_hyperparams",
    "write_comparison_csv",
    "write_eval_csv",
    "write_series_csv",
    "write_trials_csv",
]
