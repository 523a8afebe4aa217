"""Categorical perturbation: response-based pseudo-distance between levels,
budget-bounded joint perturbation restricted to the data envelope, and the
marginal-shuffling baseline.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import CategoricalEnvelope, Dataset, extract_envelope
from .errors import ContractError
from .noise import observation_rng
from .numeric import PerturbationBatch

# substream tags keep categorical draws decoupled from numeric noise
STREAM_PSEUDO = 1
STREAM_SHUFFLE = 2

# tolerance on the budget threshold so that b=1 survives float rounding
THRESHOLD_EPS = 1e-12

METHODS = ("pseudo_distance", "shuffle")


@dataclass(frozen=True)
class LevelDistance:
    """Scaled level-distance matrices, one per categorical column."""

    matrices: tuple[np.ndarray, ...]  # per column, m_j x m_j, entries in [0, 1]
    level_means: tuple[np.ndarray, ...]  # avg(y | level), per column
    all_equal: tuple[bool, ...]  # column had identical level means


def distance_from_means(means: np.ndarray) -> tuple[np.ndarray, bool]:
    """Scaled pseudo-distance matrix from per-level mean responses.

    Raw distance is |mean_i - mean_j|; the matrix is divided by its largest
    entry so the most disparate pair sits at 1.  All-equal means yield an
    all-zero matrix (flagged: any combo then fits any budget).
    """
    raw = np.abs(means[:, None] - means[None, :])
    top = raw.max()
    if top == 0:
        return raw, True
    return raw / top, False


def fit_level_distance(ds: Dataset) -> LevelDistance:
    """Pseudo-distance per categorical column from level-conditional mean response."""
    if ds.response is None:
        raise ContractError("pseudo-distance requires a response vector")
    matrices, all_means, flags = [], [], []
    for j, col in enumerate(ds.categorical_columns):
        codes = ds.categorical_codes[:, j]
        means = np.empty(len(col.levels))
        for k, level in enumerate(col.levels):
            sel = codes == k
            if not sel.any():
                raise ContractError(
                    f"column {col.name!r}: level {level!r} never observed, "
                    "no mean response defined"
                )
            means[k] = ds.response[sel].mean()
        mat, flat = distance_from_means(means)
        matrices.append(mat)
        all_means.append(means)
        flags.append(flat)
    return LevelDistance(
        matrices=tuple(matrices), level_means=tuple(all_means), all_equal=tuple(flags)
    )


@dataclass(frozen=True)
class CategoricalSpace:
    envelope: CategoricalEnvelope
    distances: LevelDistance
    weights: np.ndarray  # per categorical column, >= 0

    @property
    def max_distance(self) -> float:
        # with min-max scaled matrices, max D = sum of weights
        return float(self.weights.sum())


def build_space(
    ds: Dataset,
    distances: LevelDistance | None = None,
    weights=None,
) -> CategoricalSpace:
    dist = distances if distances is not None else fit_level_distance(ds)
    w = np.ones(ds.p_cat) if weights is None else np.asarray(weights, dtype=float)
    if len(w) != ds.p_cat or (w < 0).any():
        raise ContractError("weights must be non-negative, one per categorical column")
    return CategoricalSpace(envelope=extract_envelope(ds), distances=dist, weights=w)


@dataclass(frozen=True)
class CategoricalPerturbPlan:
    budget: float
    k: int
    max_prop: float = 1.0
    method: str = "pseudo_distance"
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if not 0.0 <= self.budget <= 1.0:
            raise ContractError("categorical budget must be in [0, 1]")
        if self.k < 1:
            raise ContractError("K must be >= 1")
        if not 0.0 < self.max_prop <= 1.0:
            raise ContractError("max_prop must be in (0, 1]")
        if self.method not in METHODS:
            raise ContractError(f"method must be one of {METHODS}")


def observation_distance(a, b, space: CategoricalSpace) -> float:
    """Weighted sum of per-column scaled level distances."""
    return float(
        sum(
            w * mat[ai, bi]
            for w, mat, ai, bi in zip(
                space.weights, space.distances.matrices, a, b
            )
        )
    )


def neighbor_set(x, space: CategoricalSpace, b_cat: float) -> list[tuple[int, ...]]:
    """Envelope combos within budget: {z : D(z, x) <= b * sum(w)}.

    Ties at the threshold are included.  D(x, x) = 0, so the observation's
    own combo (when in the envelope) is always a member, even at b = 0.
    """
    threshold = b_cat * space.max_distance + THRESHOLD_EPS
    return [z for z in space.envelope.combos if observation_distance(z, x, space) <= threshold]


def _neighbor_cache(ds: Dataset, space: CategoricalSpace, b_cat: float):
    cache = {}
    for row in ds.categorical_codes:
        combo = tuple(int(v) for v in row)
        if combo not in cache:
            cache[combo] = neighbor_set(combo, space, b_cat)
    return cache


def pseudo_perturb(
    ds: Dataset, space: CategoricalSpace, plan: CategoricalPerturbPlan, master_seed: int
) -> PerturbationBatch:
    """K draws with replacement from each observation's neighbor set, each
    independently accepted with probability max_prop (else the original
    combo is retained).  Every output combo lies in the envelope."""
    if plan.method != "pseudo_distance":
        raise ContractError("pseudo_perturb requires method='pseudo_distance'")
    cache = _neighbor_cache(ds, space, plan.budget)
    n, k = ds.n_rows, plan.k
    out = np.empty((n, k, ds.p_cat), dtype=np.int64)
    accepted = np.empty((n, k), dtype=bool)
    for i in range(n):
        combo = tuple(int(v) for v in ds.categorical_codes[i])
        neighbors = np.asarray(cache[combo], dtype=np.int64)
        rng = observation_rng(master_seed, i, STREAM_PSEUDO)
        picks = neighbors[rng.integers(0, len(neighbors), size=k)]
        keep = rng.random(k) < plan.max_prop
        picks[~keep] = np.asarray(combo, dtype=np.int64)
        out[i] = picks
        accepted[i] = keep
    return PerturbationBatch(
        values=out,
        target_idx=tuple(range(ds.p_cat)),
        strategy="pseudo_distance",
        budget=plan.budget,
        mode="categorical",
        clipped=False,
        accepted=accepted,
    )


def shuffle_perturb(
    ds: Dataset, plan: CategoricalPerturbPlan, master_seed: int
) -> PerturbationBatch:
    """Baseline: redraw every categorical cell from its column's empirical
    marginal, ignoring the original value and the other columns."""
    if plan.method != "shuffle":
        raise ContractError("shuffle_perturb requires method='shuffle'")
    n, k, p = ds.n_rows, plan.k, ds.p_cat
    marginals = []
    for j, col in enumerate(ds.categorical_columns):
        counts = np.bincount(ds.categorical_codes[:, j], minlength=len(col.levels))
        marginals.append(counts / counts.sum())
    out = np.empty((n, k, p), dtype=np.int64)
    for i in range(n):
        rng = observation_rng(master_seed, i, STREAM_SHUFFLE)
        for j, prob in enumerate(marginals):
            out[i, :, j] = rng.choice(len(prob), size=k, p=prob)
    return PerturbationBatch(
        values=out,
        target_idx=tuple(range(p)),
        strategy="shuffle",
        budget=plan.budget,
        mode="categorical",
        clipped=False,
    )


def export_distances(ds: Dataset, dist: LevelDistance, outdir) -> list[str]:
    """Write one CSV distance matrix per categorical column for audit."""
    paths = []
    for col, mat in zip(ds.categorical_columns, dist.matrices):
        path = f"{outdir}/distance_{col.name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["level", *col.levels])
            for k, level in enumerate(col.levels):
                writer.writerow([level, *[format(v, ".17g") for v in mat[k]]])
        paths.append(path)
    return paths
