"""Pipeline wiring: perturb -> score -> summarize -> diagnose, plus budget
sweeps.  One shared noise/perturbation realization is used for every model in
a run, so cross-model comparisons are paired."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from . import categorical as cat_mod
from . import numeric as num_mod
from .config import RunConfig
from .data import (
    Dataset,
    column_stats,
    extract_envelope,
    load_dataset,
    load_schema,
    pearson_correlation,
    quantile_buckets,
)
from .diagnosis import fit_diagnostic_tree, psi_rank, single_variable_diagnosis, worst_subset
from .errors import ContractError
from .metrics import SUMMARIZERS, frobenius_drift, perturbed_auc, summarize_batch
from .models import determinism_probe, open_scorer, predict_batch_perturbed
from .noise import sample_noise

log = logging.getLogger("robustkit")


def fmt(x) -> str:
    """Fixed float formatting so reruns are byte-identical."""
    if isinstance(x, str):
        return x
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


@dataclass
class PipelineContext:
    """Everything derived from the config that perturbation needs."""

    config: RunConfig
    dataset: Dataset
    reference: Dataset  # dataset the statistics come from (default: itself)
    stats: object
    corr: object
    buckets: object | None
    space: object | None  # categorical space, when in scope


def build_context(config: RunConfig) -> PipelineContext:
    schema = load_schema(config.schema)
    ds = load_dataset(config.dataset, schema, config.response_column)
    ref = (
        load_dataset(config.reference_dataset, schema, config.response_column)
        if config.reference_dataset
        else ds
    )
    stats = column_stats(ref)
    corr = pearson_correlation(ref)
    buckets = (
        quantile_buckets(ref, config.numeric.q_buckets, config.numeric.window)
        if config.numeric.strategy == "adaptive"
        else None
    )
    space = None
    if config.scope in ("categorical", "both") and ds.p_cat > 0:
        if config.categorical.method == "pseudo_distance":
            dist = cat_mod.fit_level_distance(ref)
            space = cat_mod.CategoricalSpace(
                envelope=extract_envelope(ref),
                distances=dist,
                weights=(
                    np.asarray(config.categorical.weights, dtype=float)
                    if config.categorical.weights is not None
                    else np.ones(ds.p_cat)
                ),
            )
    return PipelineContext(config, ds, ref, stats, corr, buckets, space)


def make_batches(
    ctx: PipelineContext,
    numeric_budget: float | None = None,
    cat_budget: float | None = None,
    scope: str | None = None,
):
    """Shared perturbation batches for one (budget, scope) setting."""
    cfg = ctx.config
    scope = scope or cfg.scope
    nb = cfg.numeric.budget if numeric_budget is None else numeric_budget
    cb = cfg.categorical.budget if cat_budget is None else cat_budget
    numeric_batch = None
    cat_batch = None
    if scope in ("numeric", "both") and ctx.dataset.p_num > 0:
        noise = sample_noise(ctx.dataset.n_rows, cfg.k, ctx.corr, cfg.numeric.mode, cfg.seed)
        plan = num_mod.NumericPerturbPlan(
            budget=nb,
            strategy=cfg.numeric.strategy,
            mode=cfg.numeric.mode,
            clip=cfg.numeric.clip,
            target_columns=cfg.numeric.target_columns,
        )
        numeric_batch = num_mod.perturb(ctx.dataset, ctx.stats, noise, plan, ctx.buckets)
    if scope in ("categorical", "both") and ctx.dataset.p_cat > 0:
        plan = cat_mod.CategoricalPerturbPlan(
            budget=min(cb, 1.0),
            k=cfg.k,
            max_prop=cfg.categorical.max_prop,
            method=cfg.categorical.method,
        )
        if cfg.categorical.method == "shuffle":
            cat_batch = cat_mod.shuffle_perturb(ctx.dataset, plan, cfg.seed)
        else:
            cat_batch = cat_mod.pseudo_perturb(ctx.dataset, ctx.space, plan, cfg.seed)
    if numeric_batch is None and cat_batch is None:
        raise ContractError(f"scope {scope!r} selects no columns in this dataset")
    return numeric_batch, cat_batch


def score_models(ctx: PipelineContext, numeric_batch, cat_batch):
    """Score every configured model against the same batches."""
    cfg = ctx.config
    columns = [c.name for c in ctx.dataset.schema]
    probe_rows = ctx.dataset.decoded_rows()[:16]
    results = {}
    for handle in cfg.models:
        scorer = open_scorer(handle)
        determinism_probe(scorer, columns, probe_rows)
        yhat, yhat_ik = predict_batch_perturbed(
            scorer,
            ctx.dataset,
            numeric_batch=numeric_batch,
            cat_batch=cat_batch,
            batch_size=handle.batch_size,
            threads=cfg.threads,
        )
        results[handle.name] = (yhat, yhat_ik)
        if hasattr(scorer, "close"):
            scorer.close()
    return results


def run(config: RunConfig, outdir: str, force: bool = False) -> dict:
    """Full report: per-observation volatility, aggregates, optional AUC."""
    _prepare_outdir(outdir, force)
    ctx = build_context(config)
    numeric_batch, cat_batch = make_batches(ctx)
    results = score_models(ctx, numeric_batch, cat_batch)
    alternates = tuple(m for m in SUMMARIZERS if m != config.metric)
    summary_doc = {"metric": config.metric, "reference": config.reference, "models": {}}
    per_obs_rows = []
    for name, (yhat, yhat_ik) in results.items():
        summ = summarize_batch(
            yhat,
            yhat_ik,
            metric=config.metric,
            reference=config.reference,
            y=ctx.dataset.response,
            alternates=alternates,
        )
        summary_doc["models"][name] = {
            "aggregate": summ.aggregate,
            "alternate_aggregates": {m: float(v.mean()) for m, v in summ.alternates.items()},
        }
        for i in range(ctx.dataset.n_rows):
            per_obs_rows.append(
                [i, name, summ.per_obs[i], *[summ.alternates[m][i] for m in alternates]]
            )
        if config.auc and ctx.dataset.response is not None:
            per_k, auc_summary = perturbed_auc(ctx.dataset.response, yhat_ik)
            summary_doc["models"][name]["auc"] = auc_summary
            summary_doc["models"][name]["auc_original"] = _original_auc(
                ctx.dataset.response, yhat
            )
            write_csv(
                os.path.join(outdir, f"auc_{name}.csv"),
                ["k", "auc"],
                [[k, v] for k, v in enumerate(per_k)],
            )
    write_csv(
        os.path.join(outdir, "per_obs_rppv.csv"),
        ["observation_id", "model", config.metric, *alternates],
        per_obs_rows,
    )
    with open(os.path.join(outdir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary_doc


def _original_auc(y, yhat):
    from .metrics import auc

    return auc(y, yhat)


def sweep(config: RunConfig, outdir: str, force: bool = False) -> list:
    """ArPPV per (budget, model); categorical budget = multiplier * budget."""
    if not config.sweep.budgets:
        raise ContractError("sweep requires a non-empty budget list")
    _prepare_outdir(outdir, force)
    ctx = build_context(config)
    rows = []
    drift_rows = []
    for b in config.sweep.budgets:
        cat_b = min(b * config.sweep.cat_multiplier, 1.0)
        numeric_batch, cat_batch = make_batches(
            ctx, numeric_budget=b, cat_budget=cat_b, scope=config.sweep.scope
        )
        results = score_models(ctx, numeric_batch, cat_batch)
        for name, (yhat, yhat_ik) in results.items():
            summ = summarize_batch(yhat, yhat_ik, metric=config.metric,
                                   reference=config.reference, y=ctx.dataset.response)
            rows.append([b, name, summ.aggregate])
        if config.sweep.drift and numeric_batch is not None and ctx.dataset.p_num >= 2:
            drift_rows.append(
                [
                    b,
                    config.numeric.mode,
                    config.numeric.strategy,
                    frobenius_drift(ctx.dataset, numeric_batch),
                ]
            )
    write_csv(os.path.join(outdir, "sweep.csv"), ["budget", "model", "arppv"], rows)
    if drift_rows:
        write_csv(
            os.path.join(outdir, "drift.csv"),
            ["budget", "mode", "strategy", "avg_frobenius"],
            drift_rows,
        )
    return rows


def diagnose(config: RunConfig, outdir: str, force: bool = False) -> dict:
    """worst subset -> PSI ranking -> partition tree -> single-variable runs."""
    _prepare_outdir(outdir, force)
    diag_dir = os.path.join(outdir, "diagnosis")
    os.makedirs(diag_dir, exist_ok=True)
    ctx = build_context(config)
    numeric_batch, cat_batch = make_batches(ctx)
    results = score_models(ctx, numeric_batch, cat_batch)
    out = {}
    for name, (yhat, yhat_ik) in results.items():
        summ = summarize_batch(yhat, yhat_ik, metric=config.metric,
                               reference=config.reference, y=ctx.dataset.response)
        ranking = psi_rank(ctx.dataset, summ.per_obs, config.diagnosis.worst_q)
        write_csv(
            os.path.join(diag_dir, f"psi_{name}.csv"),
            ["column", "psi"],
            [[col, val] for col, val, _ in ranking],
        )
        for col, _, res in ranking:
            write_csv(
                os.path.join(diag_dir, f"psi_{name}_{col}_bins.csv"),
                ["bin", "base", "new", "ln_ratio", "diff", "index"],
                [[r.bin_label, r.base, r.new, r.ln_ratio, r.diff, r.index] for r in res.rows],
            )
        tree = fit_diagnostic_tree(
            ctx.dataset, summ.per_obs, config.diagnosis.max_depth,
            config.diagnosis.min_leaf,
        )
        with open(os.path.join(diag_dir, f"tree_{name}.json"), "w", encoding="utf-8") as fh:
            json.dump(tree.root.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        single = {}
        handle = next(h for h in config.models if h.name == name)
        scorer = open_scorer(handle)
        for col in config.diagnosis.columns:
            sv = single_variable_diagnosis(
                scorer,
                ctx.dataset,
                col,
                budget=config.diagnosis.budget or config.numeric.budget,
                k=config.k,
                master_seed=config.seed,
                strategy=config.numeric.strategy,
                mode=config.numeric.mode,
                grid_size=config.diagnosis.grid,
                stats=ctx.stats,
                clip=config.numeric.clip,
            )
            write_csv(
                os.path.join(diag_dir, f"singlevar_{name}_{col}.csv"),
                ["obs_id", "value", "rppv", "violations"],
                [
                    [i, sv.scatter[i, 0], sv.per_obs[i], int(sv.violations[i])]
                    for i in range(ctx.dataset.n_rows)
                ],
            )
            write_csv(
                os.path.join(diag_dir, f"pdp_{name}_{col}.csv"),
                ["grid", "mean_prediction"],
                sv.pdp_curve,
            )
            single[col] = sv
        if hasattr(scorer, "close"):
            scorer.close()
        out[name] = {"psi": ranking, "tree": tree, "single": single,
                     "worst_mask": worst_subset(summ.per_obs, config.diagnosis.worst_q)}
    return out


def _prepare_outdir(outdir: str, force: bool) -> None:
    if os.path.isdir(outdir) and os.listdir(outdir) and not force:
        raise ContractError(f"output directory {outdir!r} is not empty (use --force)")
    os.makedirs(outdir, exist_ok=True)
