"""Command line entry point: run / sweep / diagnose / psi / pdp."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

from . import pipeline
from .config import load_config
from .errors import RobustkitError
from .metrics import summarize_batch
from .models import open_scorer, pdp, pdp_grid


def _override(cfg, **changes):
    changes = {k: v for k, v in changes.items() if v is not None}
    return dataclasses.replace(cfg, **changes) if changes else cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="robust",
        description="Budget-controlled covariate perturbation robustness reports",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("-c", "--config", required=True)
        p.add_argument("-o", "--outdir", default="report")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--force", action="store_true")

    common(sub.add_parser("run", help="perturb, score, and summarize"))

    p = sub.add_parser("sweep", help="ArPPV across a budget list")
    common(p)
    p.add_argument("--budgets", help="comma-separated budget list")
    p.add_argument("--cat-multiplier", type=float)
    p.add_argument("--scope", choices=("numeric", "categorical", "both"))
    p.add_argument("--drift", action="store_true")

    p = sub.add_parser("diagnose", help="PSI ranking, partition tree, single-variable runs")
    common(p)
    p.add_argument("--worst-q", type=float)
    p.add_argument("--columns", help="comma-separated columns for single-variable diagnosis")

    p = sub.add_parser("psi", help="PSI ranking only")
    common(p)
    p.add_argument("--worst-q", type=float)

    p = sub.add_parser("pdp", help="partial dependence curve for one column")
    common(p)
    p.add_argument("--column", required=True)
    p.add_argument("--grid", type=int, default=50)
    p.add_argument("--model", help="model name from the config (default: first)")

    args = parser.parse_args(argv)
    logging.basicConfig(level=os.environ.get("ROBUST_LOG", "WARNING").upper())

    try:
        cfg = load_config(args.config)
        cfg = _override(cfg, seed=args.seed, threads=args.threads)
        if args.command == "run":
            pipeline.run(cfg, args.outdir, args.force)
        elif args.command == "sweep":
            sweep_cfg = cfg.sweep
            if args.budgets:
                budgets = tuple(float(b) for b in args.budgets.split(","))
                sweep_cfg = dataclasses.replace(sweep_cfg, budgets=budgets)
            sweep_cfg = _override(
                sweep_cfg,
                cat_multiplier=args.cat_multiplier,
                scope=args.scope,
                drift=True if args.drift else None,
            )
            cfg = dataclasses.replace(cfg, sweep=sweep_cfg)
            pipeline.sweep(cfg, args.outdir, args.force)
        elif args.command == "diagnose":
            diag_cfg = _override(
                cfg.diagnosis,
                worst_q=args.worst_q,
                columns=tuple(args.columns.split(",")) if args.columns else None,
            )
            cfg = dataclasses.replace(cfg, diagnosis=diag_cfg)
            pipeline.diagnose(cfg, args.outdir, args.force)
        elif args.command == "psi":
            diag_cfg = _override(cfg.diagnosis, worst_q=args.worst_q, columns=())
            cfg = dataclasses.replace(cfg, diagnosis=diag_cfg)
            pipeline.diagnose(cfg, args.outdir, args.force)
        elif args.command == "pdp":
            _run_pdp(cfg, args)
    except RobustkitError as exc:
        report = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(report), file=sys.stderr)
        return 1
    return 0


def _run_pdp(cfg, args) -> None:
    ctx = pipeline.build_context(cfg)
    handle = (
        next(h for h in cfg.models if h.name == args.model)
        if args.model
        else cfg.models[0]
    )
    scorer = open_scorer(handle)
    curve = pdp(scorer, ctx.dataset, args.column, pdp_grid(ctx.dataset, args.column, args.grid))
    os.makedirs(args.outdir, exist_ok=True)
    pipeline.write_csv(
        os.path.join(args.outdir, f"pdp_{handle.name}_{args.column}.csv"),
        ["grid", "mean_prediction"],
        curve,
    )
    if hasattr(scorer, "close"):
        scorer.close()


if __name__ == "__main__":
    sys.exit(main())
