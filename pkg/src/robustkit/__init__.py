"""robustkit: budget-controlled covariate perturbation for tabular model
robustness testing, with volatility metrics and local diagnosis tools."""

from .data import (
    ColumnSchema,
    ColumnStats,
    CorrelationModel,
    Dataset,
    column_stats,
    extract_envelope,
    load_dataset,
    load_schema,
    pearson_correlation,
    quantile_buckets,
    write_dataset,
)
from .metrics import arppv, rppv, summarize_deviations
from .noise import sample_noise
from .numeric import NumericPerturbPlan, PerturbationBatch

__all__ = [
    "ColumnSchema",
    "ColumnStats",
    "CorrelationModel",
    "Dataset",
    "NumericPerturbPlan",
    "PerturbationBatch",
    "arppv",
    "column_stats",
    "extract_envelope",
    "load_dataset",
    "load_schema",
    "pearson_correlation",
    "quantile_buckets",
    "rppv",
    "sample_noise",
    "summarize_deviations",
    "write_dataset",
]

__version__ = "0.1.0"
