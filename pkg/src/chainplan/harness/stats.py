"""Resampling statistics for evaluation summaries."""

from __future__ import annotations

import numpy as np


def bootstrap_ci(samples, iterations: int = 10_000, confidence: float = 0.95,
                 seed: int = 20240) -> tuple:
    """Pivotal bootstrap confidence interval for the mean.

    Resamples the mean `iterations` times and returns
    (2*m - q_{1-a/2}, 2*m - q_{a/2}) where m is the sample mean and q the
    bootstrap quantiles. Seeded, so identical inputs give identical
    intervals.
    """
    samples = np.asarray(samples, dtype=np.float64).ravel()
    n = samples.size
    if n < 2:
        raise ValueError("bootstrap_ci needs at least 2 samples")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must be in (0, 1)")
    rng = np.random.default_rng(np.random.PCG64(seed))
    idx = rng.integers(0, n, size=(int(iterations), n))
    means = samples[idx].mean(axis=1)
    alpha = 1.0 - confidence
    q_lo, q_hi = np.quantile(means, [alpha / 2.0, 1.0 - alpha / 2.0])
    m = samples.mean()
    return float(2.0 * m - q_hi), float(2.0 * m - q_lo)
