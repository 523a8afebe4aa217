"""Seeded Gaussian noise fields, correlated via a lower-triangular factor.

Reproducibility contract: the noise block for observation i is a pure
function of (master_seed, i, mode, K, p_num).  Each observation gets its
own PCG64 generator seeded with SeedSequence([master_seed, i]), so the
result is independent of worker count and evaluation order.  Standard
normals come from numpy's Generator.standard_normal (ziggurat); the
generator choice is fixed for cross-run determinism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CorrelationModel
from .errors import ContractError, FactorizationError

JITTER_START = 1e-10
JITTER_MAX = 1e-6

MODES = ("correlated", "independent")


def factorize_matrix(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky factor with diagonal-jitter repair for semidefinite inputs.

    Returns (L, jitter_used); L @ L.T reproduces matrix + jitter*I.
    """
    try:
        return np.linalg.cholesky(matrix), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_START
    eye = np.eye(matrix.shape[0])
    while jitter <= JITTER_MAX:
        try:
            return np.linalg.cholesky(matrix + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 2.0
    raise FactorizationError(
        f"correlation matrix not factorable after jitter up to {JITTER_MAX}"
    )


def factorize(corr: CorrelationModel) -> np.ndarray:
    """Lower-triangular factor of the (possibly repaired) correlation matrix."""
    return corr.factor


@dataclass(frozen=True)
class NoiseField:
    values: np.ndarray  # (n, K, p_num)
    mode: str
    master_seed: int


def observation_rng(master_seed: int, obs_index: int, stream: int = 0) -> np.random.Generator:
    """Per-observation substream; `stream` decouples independent uses of the seed."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([int(master_seed), int(obs_index), stream]))
    )


def sample_noise(
    n: int,
    k: int,
    corr: CorrelationModel,
    mode: str,
    master_seed: int,
) -> NoiseField:
    """Draw the K x p_num Gaussian noise block for each of n observations."""
    if k < 1:
        raise ContractError("K must be >= 1")
    if mode not in MODES:
        raise ContractError(f"mode must be one of {MODES}")
    p = corr.matrix.shape[0]
    values = np.empty((n, k, p))
    lt = corr.factor.T
    for i in range(n):
        z = observation_rng(master_seed, i).standard_normal((k, p))
        values[i] = z @ lt if mode == "correlated" else z
    return NoiseField(values=values, mode=mode, master_seed=master_seed)
