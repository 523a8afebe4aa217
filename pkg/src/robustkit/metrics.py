"""Prediction-volatility summaries (rPPV and friends), the ArPPV aggregate,
perturbed AUC, and correlation drift under perturbation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .data import Dataset, pearson_matrix
from .errors import ContractError
from .numeric import PerturbationBatch

SUMMARIZERS = ("rms", "ms", "abs_max", "max_sq", "abs_mean", "abs_median")

REFERENCES = ("original_prediction", "true_response")


def summarize_deviations(devs, metric: str = "rms") -> float:
    """Collapse the K per-perturbation deviations of one observation."""
    devs = np.asarray(devs, dtype=float)
    if devs.size == 0:
        raise ContractError("deviation vector must be non-empty")
    if metric == "rms":
        return float(np.sqrt(np.mean(devs**2)))
    if metric == "ms":
        return float(np.mean(devs**2))
    if metric == "abs_max":
        return float(np.max(np.abs(devs)))
    if metric == "max_sq":
        return float(np.max(devs**2))
    if metric == "abs_mean":
        return float(np.mean(np.abs(devs)))
    if metric == "abs_median":
        return float(np.median(np.abs(devs)))
    raise ContractError(f"unknown summarizer {metric!r}; choose from {SUMMARIZERS}")


def rppv(yhat_i: float, yhat_ik) -> float:
    """RMS deviation of the K perturbed predictions from the original one."""
    return summarize_deviations(np.asarray(yhat_ik, dtype=float) - yhat_i, "rms")


def arppv(per_obs) -> float:
    """Arithmetic mean of per-observation volatility."""
    per_obs = np.asarray(per_obs, dtype=float)
    if per_obs.size == 0:
        raise ContractError("need at least one observation")
    return float(per_obs.mean())


@dataclass(frozen=True)
class RobustnessSummary:
    per_obs: np.ndarray  # (n,) default-metric summary per observation
    aggregate: float
    metric: str
    reference: str
    alternates: dict  # metric name -> (n,) vector


def summarize_batch(
    yhat: np.ndarray,
    yhat_ik: np.ndarray,
    metric: str = "rms",
    reference: str = "original_prediction",
    y: np.ndarray | None = None,
    alternates: tuple[str, ...] = (),
) -> RobustnessSummary:
    """Per-observation summaries and the aggregate over a prediction batch.

    reference='true_response' measures deviation from y_i instead of the
    original prediction, mixing model bias into the per-observation value.
    """
    if reference not in REFERENCES:
        raise ContractError(f"reference must be one of {REFERENCES}")
    if reference == "true_response":
        if y is None:
            raise ContractError("true_response reference requires a response vector")
        base = np.asarray(y, dtype=float)
    else:
        base = yhat
    devs = yhat_ik - base[:, None]
    per_obs = np.array([summarize_deviations(d, metric) for d in devs])
    alt = {
        m: np.array([summarize_deviations(d, m) for d in devs]) for m in alternates
    }
    return RobustnessSummary(
        per_obs=per_obs,
        aggregate=arppv(per_obs),
        metric=metric,
        reference=reference,
        alternates=alt,
    )


def auc(y: np.ndarray, scores: np.ndarray) -> float:
    """Mann-Whitney AUC with midrank tie handling."""
    y = np.asarray(y)
    pos = y == 1
    n1, n0 = int(pos.sum()), int((~pos).sum())
    if n1 == 0 or n0 == 0:
        raise ContractError("AUC undefined: response contains a single class")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def perturbed_auc(y: np.ndarray, yhat_ik: np.ndarray) -> tuple[list[float], dict]:
    """AUC of each perturbation replicate (column k of yhat_ik) plus summary."""
    k_count = yhat_ik.shape[1]
    per_k = [auc(y, yhat_ik[:, k]) for k in range(k_count)]
    arr = np.asarray(per_k)
    summary = {
        "mean": float(arr.mean()),
        "q25": float(np.quantile(arr, 0.25)),
        "median": float(np.quantile(arr, 0.5)),
        "q75": float(np.quantile(arr, 0.75)),
    }
    return per_k, summary


def frobenius_drift(ds: Dataset, batch: PerturbationBatch) -> float:
    """Average over replicates of ||corr(perturbed_k) - corr(original)||_F."""
    if ds.p_num < 2:
        raise ContractError("correlation drift needs at least 2 numeric columns")
    base = pearson_matrix(ds.numeric_values)
    k_count = batch.values.shape[1]
    norms = [
        np.linalg.norm(pearson_matrix(batch.values[:, k, :]) - base)
        for k in range(k_count)
    ]
    return float(np.mean(norms))
