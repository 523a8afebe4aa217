"""Model loading and row-block scoring.

The GLM evaluator here is written against the coefficient-file format only;
it deliberately shares no code with any client-side implementation so that
cross-implementation comparisons are meaningful.
"""

import json
import math
import pickle

from .config import AdapterConfig, AdapterError


class GlmModel:
    """Evaluates a JSON coefficient file: intercept + numeric terms +
    one-hot dummy terms keyed ``"COLUMN=level"``."""

    def __init__(self, path):
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise AdapterError(f"cannot load GLM file {path}: {exc}") from exc
        self.link = raw.get("link", "identity")
        if self.link not in ("identity", "logit"):
            raise AdapterError(f"unsupported GLM link {self.link!r}")
        self.intercept = float(raw.get("intercept", 0.0))
        self.numeric = {}
        self.dummies = {}  # column -> {level: coefficient}
        for key, coef in raw.get("coefficients", {}).items():
            if "=" in key:
                column, level = key.split("=", 1)
                self.dummies.setdefault(column, {})[level] = float(coef)
            else:
                self.numeric[key] = float(coef)
        self.reference_levels = dict(raw.get("reference_levels", {}))

    def score(self, columns, rows):
        positions = {name: j for j, name in enumerate(columns)}
        for name in list(self.numeric) + list(self.dummies):
            if name not in positions:
                raise AdapterError(f"request is missing model column {name!r}")
        out = []
        for row in rows:
            eta = self.intercept
            for name, coef in self.numeric.items():
                eta += coef * float(row[positions[name]])
            for name, levels in self.dummies.items():
                eta += levels.get(row[positions[name]], 0.0)
            if self.link == "logit":
                out.append(1.0 / (1.0 + math.exp(-eta)))
            else:
                out.append(eta)
        return out

    def probe_rows(self):
        """Two synthetic rows covering every model column, for the startup
        determinism check."""
        columns = list(self.numeric) + list(self.dummies)
        rows = []
        for fill in (0.0, 1.0):
            row = []
            for name in columns:
                if name in self.numeric:
                    row.append(fill)
                else:
                    levels = sorted(self.dummies[name])
                    row.append(levels[int(fill) % len(levels)])
            rows.append(row)
        return columns, rows


class PickleModel:
    """Wraps a pickled estimator exposing predict / predict_proba over a
    row block, or a plain callable."""

    def __init__(self, path, predict_mode, columns):
        try:
            with open(path, "rb") as fh:
                self.obj = pickle.load(fh)
        except (OSError, pickle.UnpicklingError) as exc:
            raise AdapterError(f"cannot load pickle {path}: {exc}") from exc
        self.predict_mode = predict_mode
        self.columns = columns

    def score(self, columns, rows):
        if self.columns is not None:
            positions = {name: j for j, name in enumerate(columns)}
            missing = [c for c in self.columns if c not in positions]
            if missing:
                raise AdapterError(f"request is missing model columns {missing}")
            rows = [[row[positions[c]] for c in self.columns] for row in rows]
        if self.predict_mode == "probability":
            if not hasattr(self.obj, "predict_proba"):
                raise AdapterError("probability mode requires predict_proba")
            preds = [p[1] for p in self.obj.predict_proba(rows)]
        elif hasattr(self.obj, "predict"):
            preds = self.obj.predict(rows)
        elif callable(self.obj):
            preds = self.obj(rows)
        else:
            raise AdapterError("pickled object has no predict method and is not callable")
        return [float(v) for v in preds]

    def probe_rows(self):
        return None  # arbitrary estimators cannot be probed with synthetic rows


def load_model(config: AdapterConfig):
    if config.kind == "glm":
        return GlmModel(config.artifact)
    return PickleModel(config.artifact, config.predict_mode, config.columns)


def startup_probe(model):
    """Score a synthetic batch twice; stochastic models fail to start."""
    probe = model.probe_rows()
    if probe is None:
        return
    columns, rows = probe
    if model.score(columns, rows) != model.score(columns, rows):
        raise AdapterError("model is not deterministic on the probe batch")
