"""Seeded stochastic primitives: demand curves and lead-time sampling.

Every draw is a pure function of (seed, purpose, entity, step, index), so a
realization never depends on query order or on what an agent did in between.
Purposes keep substreams for demands and lead times disjoint even when entity
ids collide. The hash is a splitmix64-style avalanche chain over uint64,
evaluated with numpy so scalar and vectorized queries agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

# substream purposes
DEMAND = 1
PRODUCTION_LEAD = 2
TRANSPORT_LEAD = 3
EPISODE = 4

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64


def _avalanche(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> _U64(30))) * _MIX1
    x = (x ^ (x >> _U64(27))) * _MIX2
    return x ^ (x >> _U64(31))


def hash64(seed: int, *parts) -> np.ndarray:
    """Chained avalanche hash of (seed, parts...). Parts may be arrays.

    uint64 wrap-around is the point of the mix, so overflow warnings are
    silenced for the duration of the computation.
    """
    with np.errstate(over="ignore"):
        h = _avalanche(np.asarray(np.uint64(seed & 0xFFFFFFFFFFFFFFFF)) + _GOLDEN)
        for p in parts:
            p = np.asarray(p, dtype=np.int64).astype(np.uint64)
            h = _avalanche(h + _GOLDEN + p)
    return h


def derive_seed(seed: int, *parts) -> int:
    """Child seed for a labeled substream (e.g. per-episode seeds)."""
    return int(hash64(seed, EPISODE, *parts))


def uniform01(seed: int, *parts) -> np.ndarray:
    """Uniform draw in the open interval (0, 1), one per broadcast element."""
    h = hash64(seed, *parts)
    return ((h >> _U64(11)).astype(np.float64) + 0.5) * 2.0**-53


def gaussian(seed: int, *parts) -> np.ndarray:
    """Standard normal draw via inverse CDF of the uniform substream."""
    return ndtri(uniform01(seed, *parts))


def poisson_capped(u: np.ndarray, lam: float, cap: int) -> np.ndarray:
    """Poisson(lam) inverted by sequential CDF search, truncated at cap.

    Values beyond cap are indistinguishable after the min() clamp applied by
    lead-time sampling, so the search stops early at cap.
    """
    u = np.asarray(u, dtype=np.float64)
    k = np.zeros(u.shape, dtype=np.int64)
    p = np.full(u.shape, np.exp(-lam))
    cdf = p.copy()
    for step in range(1, cap + 1):
        unresolved = u >= cdf
        if not unresolved.any():
            break
        k[unresolved] = step
        p = p * (lam / step)
        cdf = cdf + p
    return np.minimum(k, cap)


@dataclass(frozen=True)
class DemandSpec:
    """Per-retailer demand process shared by simulation and planning."""

    kind: str = "seasonal"  # "seasonal" or "regular"
    sin_min: float = 100.0
    sin_max: float = 300.0
    peaks: int = 2
    period: float = 360.0
    level: float = 200.0  # regular-demand base
    clip_min: float = 0.0
    clip_max: float = 400.0
    perturbation: str = "none"  # "none", "gaussian" or "uniform"
    sigma: float = 0.0
    low: float = 0.0
    high: float = 0.0

    def validate(self) -> list[str]:
        errs = []
        if self.kind not in ("seasonal", "regular"):
            errs.append(f"unknown demand kind {self.kind!r}")
        if self.perturbation not in ("none", "gaussian", "uniform"):
            errs.append(f"unknown perturbation kind {self.perturbation!r}")
        if not self.clip_min <= self.clip_max:
            errs.append("demand clip_min above clip_max")
        if self.kind == "seasonal":
            if not self.sin_min <= self.sin_max:
                errs.append("sinusoid min above max")
            if not (self.clip_min <= self.sin_min and self.sin_max <= self.clip_max):
                errs.append("sinusoid range outside clip bounds")
            if self.peaks < 1:
                errs.append("peak count must be at least 1")
            if self.period <= 0:
                errs.append("sinusoid period must be positive")
        if self.perturbation == "gaussian" and self.sigma < 0:
            errs.append("gaussian perturbation sigma must be non-negative")
        if self.perturbation == "uniform" and self.low > self.high:
            errs.append("uniform perturbation low above high")
        return errs


@dataclass(frozen=True)
class LeadTimeSpec:
    """Lead-time process for production and transport batches."""

    kind: str = "stochastic"  # "stochastic" or "constant"
    average: int = 2
    maximum: int = 4

    def validate(self) -> list[str]:
        errs = []
        if self.kind not in ("stochastic", "constant"):
            errs.append(f"unknown lead-time kind {self.kind!r}")
        if self.average < 1:
            errs.append("average lead time must be at least 1")
        if self.maximum < self.average:
            errs.append("maximum lead time below average")
        return errs


def sinusoid(spec: DemandSpec, step) -> np.ndarray:
    """Seasonal base curve: sin_min + (sin_max - sin_min)/2 * (1 + sin(2*peaks*pi*t/period))."""
    t = np.asarray(step, dtype=np.float64)
    half = (spec.sin_max - spec.sin_min) / 2.0
    return spec.sin_min + half * (1.0 + np.sin(2.0 * spec.peaks * np.pi * t / spec.period))


def base_demand(spec: DemandSpec, step) -> np.ndarray:
    """Unperturbed demand level at a step (seasonal curve or flat level)."""
    if spec.kind == "seasonal":
        return sinusoid(spec, step)
    return np.full(np.shape(step), spec.level, dtype=np.float64)


def _perturbation(spec: DemandSpec, seed: int, retailer, step) -> np.ndarray:
    if spec.perturbation == "gaussian" and spec.sigma > 0:
        return spec.sigma * gaussian(seed, DEMAND, retailer, step)
    if spec.perturbation == "uniform":
        u = uniform01(seed, DEMAND, retailer, step)
        return spec.low + u * (spec.high - spec.low)
    return np.zeros(np.broadcast_shapes(np.shape(retailer), np.shape(step)))


def sample_demand(spec: DemandSpec, seed: int, retailer: int, step: int) -> float:
    """One retailer's demand at one step, clipped to the spec's bounds."""
    value = base_demand(spec, step) + _perturbation(spec, seed, retailer, step)
    return float(np.clip(value, spec.clip_min, spec.clip_max))


def demand_series(spec: DemandSpec, seed: int, retailers, steps) -> np.ndarray:
    """Demands for all (step, retailer) pairs, shape (len(steps), len(retailers))."""
    retailers = np.asarray(retailers, dtype=np.int64)
    steps = np.asarray(steps, dtype=np.int64)
    grid_r = retailers[None, :]
    grid_t = steps[:, None]
    base = base_demand(spec, grid_t)
    base = np.broadcast_to(base, (len(steps), len(retailers)))
    values = base + _perturbation(spec, seed, grid_r, grid_t)
    return np.clip(values, spec.clip_min, spec.clip_max)


def sample_lead_time(spec: LeadTimeSpec, seed: int, purpose: int, entity: int, step: int) -> int:
    """Lead time for one dispatched batch, in whole steps >= 1."""
    if spec.kind == "constant":
        return int(spec.average)
    u = uniform01(seed, purpose, entity, step)
    k = poisson_capped(u, float(spec.average - 1), spec.maximum - 1)
    return int(k) + 1


def lead_series(spec: LeadTimeSpec, seed: int, purpose: int, entities, steps) -> np.ndarray:
    """Lead times for all (step, entity) pairs, shape (len(steps), len(entities))."""
    entities = np.asarray(entities, dtype=np.int64)
    steps = np.asarray(steps, dtype=np.int64)
    shape = (len(steps), len(entities))
    if spec.kind == "constant":
        return np.full(shape, int(spec.average), dtype=np.int64)
    u = uniform01(seed, purpose, entities[None, :], steps[:, None])
    k = poisson_capped(u, float(spec.average - 1), spec.maximum - 1)
    return k + 1
