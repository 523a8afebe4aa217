"""Run configuration: a JSON file validated into dataclasses.  CLI flags
override individual fields."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .errors import ContractError
from .models import DEFAULT_BATCH_SIZE, ModelHandle

SCOPES = ("numeric", "categorical", "both")


@dataclass(frozen=True)
class NumericPlanConfig:
    budget: float = 0.05
    strategy: str = "raw"
    mode: str = "correlated"
    clip: bool = True
    q_buckets: int = 20
    window: int = 3
    target_columns: tuple[str, ...] | None = None


@dataclass(frozen=True)
class CategoricalPlanConfig:
    budget: float = 0.2
    max_prop: float = 1.0
    method: str = "pseudo_distance"
    weights: tuple[float, ...] | None = None


@dataclass(frozen=True)
class DiagnosisConfig:
    worst_q: float = 0.1
    max_depth: int = 3
    min_leaf: int | None = None
    columns: tuple[str, ...] = ()
    grid: int = 50
    budget: float | None = None  # defaults to the numeric plan budget


@dataclass(frozen=True)
class SweepConfig:
    budgets: tuple[float, ...] = ()
    cat_multiplier: float = 5.0
    scope: str = "both"
    drift: bool = False

    def __post_init__(self):
        if list(self.budgets) != sorted(set(self.budgets)):
            raise ContractError("sweep budgets must be strictly increasing")
        if self.scope not in SCOPES:
            raise ContractError(f"sweep scope must be one of {SCOPES}")


@dataclass(frozen=True)
class RunConfig:
    dataset: str
    schema: str
    models: tuple[ModelHandle, ...]
    response_column: str | None = None
    reference_dataset: str | None = None
    k: int = 100
    seed: int = 0
    metric: str = "rms"
    reference: str = "original_prediction"
    scope: str = "both"
    threads: int = 1
    auc: bool = False
    numeric: NumericPlanConfig = field(default_factory=NumericPlanConfig)
    categorical: CategoricalPlanConfig = field(default_factory=CategoricalPlanConfig)
    diagnosis: DiagnosisConfig = field(default_factory=DiagnosisConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def __post_init__(self):
        if self.k < 1:
            raise ContractError("K must be >= 1")
        if self.scope not in SCOPES:
            raise ContractError(f"scope must be one of {SCOPES}")
        if not self.models:
            raise ContractError("at least one model is required")


def _tuple_or_none(v):
    return tuple(v) if v is not None else None


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if p is None or os.path.isabs(p) else os.path.join(base, p)

    models = tuple(
        ModelHandle(
            kind=m["kind"],
            spec=resolve(m["spec"]) if m["kind"] == "builtin_glm" else m["spec"],
            name=m.get("name", f"model{idx}"),
            batch_size=int(m.get("batch_size", DEFAULT_BATCH_SIZE)),
        )
        for idx, m in enumerate(raw.get("models", []))
    )
    num = raw.get("numeric", {})
    cat = raw.get("categorical", {})
    diag = raw.get("diagnosis", {})
    sweep = raw.get("sweep", {})
    cfg = RunConfig(
        dataset=resolve(raw["dataset"]),
        schema=resolve(raw["schema"]),
        models=models,
        response_column=raw.get("response_column"),
        reference_dataset=resolve(raw.get("reference_dataset")),
        k=int(raw.get("k", 100)),
        seed=int(raw.get("seed", 0)),
        metric=raw.get("metric", "rms"),
        reference=raw.get("reference", "original_prediction"),
        scope=raw.get("scope", "both"),
        threads=int(raw.get("threads", 1)),
        auc=bool(raw.get("auc", False)),
        numeric=NumericPlanConfig(
            budget=float(num.get("budget", 0.05)),
            strategy=num.get("strategy", "raw"),
            mode=num.get("mode", "correlated"),
            clip=bool(num.get("clip", True)),
            q_buckets=int(num.get("q_buckets", 20)),
            window=int(num.get("window", 3)),
            target_columns=_tuple_or_none(num.get("target_columns")),
        ),
        categorical=CategoricalPlanConfig(
            budget=float(cat.get("budget", 0.2)),
            max_prop=float(cat.get("max_prop", 1.0)),
            method=cat.get("method", "pseudo_distance"),
            weights=_tuple_or_none(cat.get("weights")),
        ),
        diagnosis=DiagnosisConfig(
            worst_q=float(diag.get("worst_q", 0.1)),
            max_depth=int(diag.get("max_depth", 3)),
            min_leaf=diag.get("min_leaf"),
            columns=tuple(diag.get("columns", ())),
            grid=int(diag.get("grid", 50)),
            budget=diag.get("budget"),
        ),
        sweep=SweepConfig(
            budgets=tuple(float(b) for b in sweep.get("budgets", ())),
            cat_multiplier=float(sweep.get("cat_multiplier", 5.0)),
            scope=sweep.get("scope", "both"),
            drift=bool(sweep.get("drift", False)),
        ),
    )
    for p in (cfg.dataset, cfg.schema):
        if not os.path.exists(p):
            raise ContractError(f"referenced file does not exist: {p}")
    if cfg.reference_dataset and not os.path.exists(cfg.reference_dataset):
        raise ContractError(f"reference dataset does not exist: {cfg.reference_dataset}")
    return cfg
