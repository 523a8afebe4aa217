#!/usr/bin/env python3
"""Generate a synthetic credit-style dataset plus schema, GLM coefficient
files, and a run config, so the CLI can be exercised end to end:

    python3 scripts/make_synthetic_data.py demo/
    robust run -c demo/config.json -o demo/report
"""

import argparse
import json
from pathlib import Path

import numpy as np


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("outdir", type=Path)
    parser.add_argument("--rows", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    args.outdir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    n = args.rows

    income = rng.lognormal(10.0, 0.6, n)
    balance = income * rng.lognormal(-1.0, 0.8, n)
    age = rng.integers(21, 75, n)
    n_loans = rng.poisson(1.5, n)
    marriage = rng.choice(["married", "single", "others"], n, p=[0.5, 0.4, 0.1])
    education = rng.choice(
        ["graduate", "university", "high_school"], n, p=[0.35, 0.45, 0.2]
    )
    eta = (
        -1.0
        + 0.9 * (balance / income)
        + 0.4 * (n_loans - 1.5)
        - 0.02 * (age - 45)
        + (marriage == "single") * 0.3
        + (education == "high_school") * 0.4
    )
    default = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(int)

    with open(args.outdir / "data.csv", "w", encoding="utf-8") as fh:
        fh.write("income,balance,age,n_loans,marriage,education,default\n")
        for i in range(n):
            fh.write(
                f"{income[i]:.6f},{balance[i]:.6f},{age[i]},{n_loans[i]},"
                f"{marriage[i]},{education[i]},{default[i]}\n"
            )

    schema = [
        {"name": "income", "kind": "continuous"},
        {"name": "balance", "kind": "continuous"},
        {"name": "age", "kind": "discrete"},
        {"name": "n_loans", "kind": "discrete", "noise_inflation": 2.0},
        {"name": "marriage", "kind": "categorical", "levels": ["married", "single", "others"]},
        {
            "name": "education",
            "kind": "categorical",
            "levels": ["graduate", "university", "high_school"],
        },
    ]
    (args.outdir / "schema.json").write_text(json.dumps(schema, indent=2))

    # a smooth scorer and a deliberately fragile one, for side-by-side runs
    glm_smooth = {
        "link": "logit",
        "intercept": -1.2,
        "coefficients": {
            "income": -2e-6,
            "balance": 3e-6,
            "age": -0.01,
            "n_loans": 0.3,
            "marriage=single": 0.25,
            "education=high_school": 0.35,
        },
        "reference_levels": {"marriage": "married", "education": "graduate"},
    }
    glm_fragile = dict(glm_smooth)
    glm_fragile["coefficients"] = {
        k: v * 8 for k, v in glm_smooth["coefficients"].items()
    }
    (args.outdir / "glm_smooth.json").write_text(json.dumps(glm_smooth, indent=2))
    (args.outdir / "glm_fragile.json").write_text(json.dumps(glm_fragile, indent=2))

    config = {
        "dataset": "data.csv",
        "schema": "schema.json",
        "response_column": "default",
        "models": [
            {"kind": "builtin_glm", "spec": "glm_smooth.json", "name": "smooth"},
            {"kind": "builtin_glm", "spec": "glm_fragile.json", "name": "fragile"},
        ],
        "k": 50,
        "seed": 11,
        "auc": True,
        "numeric": {"budget": 0.05, "strategy": "raw", "mode": "correlated"},
        "categorical": {"budget": 0.25, "max_prop": 0.5},
        "diagnosis": {"worst_q": 0.1, "columns": ["balance", "age"]},
        "sweep": {"budgets": [0.0, 0.02, 0.05, 0.1, 0.2], "cat_multiplier": 5.0, "drift": True},
    }
    (args.outdir / "config.json").write_text(json.dumps(config, indent=2))
    print(f"wrote dataset ({n} rows), schema, two GLMs, and config to {args.outdir}/")


if __name__ == "__main__":
    main()
