"""Numeric covariate perturbation: raw and adaptive strategies, discrete
rounding with per-column noise inflation, and envelope clipping.

Post-processing order is fixed: round discrete columns first, then clip to
the observed [min, max] range, so that clipped discrete values stay inside
the observed integer range.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import BucketSpec, ColumnStats, Dataset, bucket_of
from .errors import ContractError
from .noise import NoiseField

log = logging.getLogger("robustkit")

STRATEGIES = ("raw", "adaptive")


@dataclass(frozen=True)
class NumericPerturbPlan:
    budget: float
    strategy: str = "raw"
    mode: str = "correlated"
    clip: bool = True
    target_columns: tuple[str, ...] | None = None  # None = all numeric columns

    def __post_init__(self):
        if self.budget < 0:
            raise ContractError("budget must be >= 0")
        if self.strategy not in STRATEGIES:
            raise ContractError(f"strategy must be one of {STRATEGIES}")
        if self.target_columns is not None and len(self.target_columns) == 0:
            raise ContractError("target_columns must be non-empty")


@dataclass(frozen=True)
class PerturbationBatch:
    """K perturbed numeric row-vectors per observation, plus provenance."""

    values: np.ndarray  # (n, K, p_num)
    target_idx: tuple[int, ...]  # numeric column indices actually perturbed
    strategy: str
    budget: float
    mode: str
    clipped: bool
    accepted: np.ndarray | None = field(default=None)  # categorical acceptance mask


def _target_indices(ds: Dataset, plan: NumericPerturbPlan) -> list[int]:
    names = ds.numeric_names
    if plan.target_columns is None:
        return list(range(len(names)))
    idx = []
    for name in plan.target_columns:
        if name not in names:
            raise ContractError(f"target column {name!r} is not a numeric column")
        idx.append(names.index(name))
    return idx


def _inflation(ds: Dataset) -> np.ndarray:
    return np.array(
        [c.noise_inflation if c.kind == "discrete" else 1.0 for c in ds.numeric_columns]
    )


def _warn_immovable_discrete(ds: Dataset, plan: NumericPerturbPlan, scale: np.ndarray):
    if plan.budget == 0.0:
        return
    targeted = set(_target_indices(ds, plan))
    for j, col in enumerate(ds.numeric_columns):
        if j in targeted and col.kind == "discrete" and 3.0 * plan.budget * scale[j] < 0.5:
            log.warning(
                "discrete column %s: 3*b*sigma*inflation = %.4g < 0.5; "
                "perturbations will round away",
                col.name,
                3.0 * plan.budget * scale[j],
            )


def _finalize(
    ds: Dataset, stats: ColumnStats, plan: NumericPerturbPlan, delta: np.ndarray
) -> PerturbationBatch:
    values = ds.numeric_values[:, None, :] + delta
    round_discrete_inplace(values, ds)
    if plan.clip:
        clip_inplace(values, stats)
    # untargeted columns must equal the originals bit-for-bit
    untargeted = delta == 0.0
    values[untargeted] = np.broadcast_to(ds.numeric_values[:, None, :], values.shape)[
        untargeted
    ]
    return PerturbationBatch(
        values=values,
        target_idx=tuple(_target_indices(ds, plan)),
        strategy=plan.strategy,
        budget=plan.budget,
        mode=plan.mode,
        clipped=plan.clip,
    )


def raw_perturb(
    ds: Dataset, stats: ColumnStats, noise: NoiseField, plan: NumericPerturbPlan
) -> PerturbationBatch:
    """Raw strategy: delta = noise * b * sigma_j (inflated on discrete columns)."""
    if plan.strategy != "raw":
        raise ContractError("raw_perturb requires strategy='raw'")
    n, k, p = noise.values.shape
    if (n, p) != (ds.n_rows, ds.p_num):
        raise ContractError("noise dimensions do not match dataset")
    scale = plan.budget * stats.sigma * _inflation(ds)
    mask = np.zeros(p)
    mask[_target_indices(ds, plan)] = 1.0
    _warn_immovable_discrete(ds, plan, stats.sigma * _inflation(ds))
    delta = noise.values * (scale * mask)
    return _finalize(ds, stats, plan, delta)


def adaptive_sigma(stats: ColumnStats, buckets: BucketSpec, ds: Dataset) -> np.ndarray:
    """Per-observation per-column noise scale from local bucket spreads.

    scale_ij = (s_q / min(s_max_j, sigma_j)) * sigma_j, where q is the bucket
    observation i falls into on column j.  A zero denominator (constant or
    degenerate column) yields scale 0.
    """
    n, p = ds.numeric_values.shape
    out = np.zeros((n, p))
    for j in range(p):
        denom = min(buckets.s_max[j], stats.sigma[j])
        if denom <= 0:
            continue
        which = bucket_of(ds.numeric_values[:, j], buckets.edges[j])
        out[:, j] = buckets.s[j][which] / denom * stats.sigma[j]
    return out


def adaptive_perturb(
    ds: Dataset,
    stats: ColumnStats,
    buckets: BucketSpec,
    noise: NoiseField,
    plan: NumericPerturbPlan,
) -> PerturbationBatch:
    """Adaptive strategy: raw with sigma_j replaced by the local scale."""
    if plan.strategy != "adaptive":
        raise ContractError("adaptive_perturb requires strategy='adaptive'")
    n, k, p = noise.values.shape
    if (n, p) != (ds.n_rows, ds.p_num):
        raise ContractError("noise dimensions do not match dataset")
    local = adaptive_sigma(stats, buckets, ds) * _inflation(ds)
    mask = np.zeros(p)
    mask[_target_indices(ds, plan)] = 1.0
    delta = noise.values * (plan.budget * local[:, None, :] * mask)
    return _finalize(ds, stats, plan, delta)


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def round_discrete_inplace(values: np.ndarray, ds: Dataset) -> None:
    """Round discrete columns to the nearest integer, half away from zero."""
    for j, col in enumerate(ds.numeric_columns):
        if col.kind == "discrete":
            values[..., j] = _round_half_away(values[..., j])


def round_discrete(batch: PerturbationBatch, ds: Dataset) -> PerturbationBatch:
    values = batch.values.copy()
    round_discrete_inplace(values, ds)
    return PerturbationBatch(
        values=values,
        target_idx=batch.target_idx,
        strategy=batch.strategy,
        budget=batch.budget,
        mode=batch.mode,
        clipped=batch.clipped,
    )


def clip_inplace(values: np.ndarray, stats: ColumnStats) -> None:
    np.clip(values, stats.min, stats.max, out=values)


def clip_to_envelope(batch: PerturbationBatch, stats: ColumnStats) -> PerturbationBatch:
    """Pin out-of-range values to the observed per-column [min, max]."""
    values = batch.values.copy()
    clip_inplace(values, stats)
    return PerturbationBatch(
        values=values,
        target_idx=batch.target_idx,
        strategy=batch.strategy,
        budget=batch.budget,
        mode=batch.mode,
        clipped=True,
    )


def perturb(
    ds: Dataset,
    stats: ColumnStats,
    noise: NoiseField,
    plan: NumericPerturbPlan,
    buckets: BucketSpec | None = None,
) -> PerturbationBatch:
    """Dispatch on plan.strategy."""
    if plan.strategy == "raw":
        return raw_perturb(ds, stats, noise, plan)
    if buckets is None:
        raise ContractError("adaptive strategy requires quantile buckets")
    return adaptive_perturb(ds, stats, buckets, noise, plan)
