"""Uniform prediction interface: builtin GLM, subprocess scorers, and HTTP
scorers.  This is the only module that knows how predictions are produced.

Wire protocol (shared with external adapters, see PROTOCOL.md):
newline-delimited JSON requests ``{"id": int, "columns": [...], "rows": [[...]]}``
answered by ``{"id": int, "predictions": [...]}``.  External scorers receive
raw categorical labels; encoding is their responsibility.
"""

from __future__ import annotations

import json
import math
import subprocess
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset, assemble_rows
from .errors import ContractError, ScoringError
from .numeric import PerturbationBatch

DEFAULT_BATCH_SIZE = 1024
PROBE_ROWS = 16
HTTP_RETRIES = 2


@dataclass(frozen=True)
class ModelHandle:
    kind: str  # builtin_glm | external_subprocess | external_http
    spec: str  # coefficient file path | command line | endpoint URL
    name: str = "model"
    batch_size: int = DEFAULT_BATCH_SIZE


@dataclass(frozen=True)
class GlmSpec:
    """Builtin GLM: intercept + numeric coefficients + one-hot dummies.

    Dummy coefficients are keyed ``"COLUMN=level"``; each categorical column
    declares its reference level (coefficient 0) in ``reference_levels``.
    """

    link: str  # identity | logit
    intercept: float
    coefficients: dict
    reference_levels: dict

    @classmethod
    def from_file(cls, path) -> "GlmSpec":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        link = raw.get("link", "identity")
        if link not in ("identity", "logit"):
            raise ContractError(f"unknown GLM link {link!r}")
        return cls(
            link=link,
            intercept=float(raw.get("intercept", 0.0)),
            coefficients={k: float(v) for k, v in raw.get("coefficients", {}).items()},
            reference_levels=dict(raw.get("reference_levels", {})),
        )

    def to_dict(self) -> dict:
        return {
            "link": self.link,
            "intercept": self.intercept,
            "coefficients": self.coefficients,
            "reference_levels": self.reference_levels,
        }


class BuiltinGlm:
    """In-process GLM evaluator over decoded rows."""

    def __init__(self, spec: GlmSpec):
        self.spec = spec

    def score(self, columns: list[str], rows: list[list]) -> list[float]:
        idx = {name: j for j, name in enumerate(columns)}
        numeric_terms, dummy_terms = [], []
        for key, coef in self.spec.coefficients.items():
            if "=" in key:
                col, level = key.split("=", 1)
                if col not in idx:
                    raise ScoringError(f"GLM dummy {key!r} references unknown column")
                dummy_terms.append((idx[col], level, coef))
            else:
                if key not in idx:
                    raise ScoringError(f"GLM coefficient {key!r} references unknown column")
                numeric_terms.append((idx[key], coef))
        out = []
        for row in rows:
            eta = self.spec.intercept
            for j, coef in numeric_terms:
                eta += coef * float(row[j])
            for j, level, coef in dummy_terms:
                if row[j] == level:
                    eta += coef
            if self.spec.link == "logit":
                p = 1.0 / (1.0 + math.exp(-eta))
                # keep the open interval (0,1) even when the linear part saturates
                out.append(min(max(p, 5e-324), 1.0 - 1e-16))
            else:
                out.append(eta)
        return out


class CallableModel:
    """In-memory scorer wrapping a plain function; used for tests and scripts.

    The wrapped function receives (columns, rows) and returns one float per row.
    """

    def __init__(self, fn):
        self.fn = fn

    def score(self, columns, rows):
        return [float(v) for v in self.fn(columns, rows)]


class SubprocessScorer:
    """Scores through a child process speaking the NDJSON protocol.

    Calls are strictly sequential; stdin/stdout is a single duplex channel.
    A dead child is fatal (no retries).
    """

    def __init__(self, command: str):
        self.proc = subprocess.Popen(
            command,
            shell=True,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._next_id = 0

    def score(self, columns, rows):
        req_id = self._next_id
        self._next_id += 1
        request = json.dumps({"id": req_id, "columns": columns, "rows": rows})
        try:
            self.proc.stdin.write(request + "\n")
            self.proc.stdin.flush()
            line = self.proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ScoringError(f"subprocess scorer died: {exc}") from exc
        if not line:
            raise ScoringError("subprocess scorer closed its output stream")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScoringError(f"malformed scorer reply: {line[:200]!r}") from exc
        if reply.get("id") != req_id:
            raise ScoringError(f"scorer reply id {reply.get('id')} != request id {req_id}")
        preds = reply.get("predictions")
        if not isinstance(preds, list) or len(preds) != len(rows):
            raise ScoringError("scorer reply length does not match request rows")
        return [float(v) for v in preds]

    def close(self):
        if self.proc.poll() is None:
            self.proc.stdin.close()
            self.proc.wait(timeout=10)


class HttpScorer:
    """Scores through POST /predict; retries twice with exponential backoff."""

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url.rstrip("/") + "/predict"
        self.timeout = timeout
        self._next_id = 0

    def score(self, columns, rows):
        req_id = self._next_id
        self._next_id += 1
        body = json.dumps({"id": req_id, "columns": columns, "rows": rows}).encode()
        last = None
        for attempt in range(HTTP_RETRIES + 1):
            try:
                req = urllib.request.Request(
                    self.url, data=body, headers={"Content-Type": "application/json"}
                )
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    if resp.status != 200:
                        raise ScoringError(f"scorer returned HTTP {resp.status}")
                    reply = json.loads(resp.read())
                break
            except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
                last = exc
                if attempt < HTTP_RETRIES:
                    time.sleep(0.2 * 2**attempt)
        else:
            raise ScoringError(f"http scorer failed after retries: {last}")
        if reply.get("id") != req_id:
            raise ScoringError("http scorer reply id mismatch")
        preds = reply.get("predictions")
        if not isinstance(preds, list) or len(preds) != len(rows):
            raise ScoringError("http scorer reply length mismatch")
        return [float(v) for v in preds]


def open_scorer(handle: ModelHandle):
    if handle.kind == "builtin_glm":
        return BuiltinGlm(GlmSpec.from_file(handle.spec))
    if handle.kind == "external_subprocess":
        return SubprocessScorer(handle.spec)
    if handle.kind == "external_http":
        return HttpScorer(handle.spec)
    raise ContractError(f"unknown model kind {handle.kind!r}")


def determinism_probe(scorer, columns, rows) -> None:
    """Score a small probe twice; mismatch means a stochastic scorer."""
    probe = rows[:PROBE_ROWS]
    if not probe:
        return
    first = predict(scorer, columns, probe)
    second = predict(scorer, columns, probe)
    if any(a != b for a, b in zip(first, second)):
        raise ScoringError("non-deterministic scorer: probe predictions differ")


def predict(
    scorer,
    columns: list[str],
    rows: list[list],
    batch_size: int = DEFAULT_BATCH_SIZE,
    threads: int = 1,
) -> np.ndarray:
    """Score rows in order, chunked by batch_size.

    Builtin/HTTP scorers may be dispatched over a thread pool; results are
    reassembled in input order.  Subprocess scorers are always sequential.
    """
    if not rows:
        return np.empty(0)
    chunks = [rows[i : i + batch_size] for i in range(0, len(rows), batch_size)]
    sequential = threads <= 1 or isinstance(scorer, SubprocessScorer)
    if sequential:
        parts = [scorer.score(columns, chunk) for chunk in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: scorer.score(columns, c), chunks))
    out = np.asarray([v for part in parts for v in part], dtype=float)
    if not np.isfinite(out).all():
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        raise ScoringError(f"non-finite prediction at row {bad}")
    return out


def merged_rows(
    ds: Dataset,
    numeric_batch: PerturbationBatch | None,
    cat_batch: PerturbationBatch | None,
    k: int,
) -> list[list]:
    """Rows for perturbation index k, mixing perturbed and original columns."""
    numeric = (
        numeric_batch.values[:, k, :] if numeric_batch is not None else ds.numeric_values
    )
    codes = (
        cat_batch.values[:, k, :] if cat_batch is not None else ds.categorical_codes
    )
    return assemble_rows(ds.schema, numeric, codes)


def predict_batch_perturbed(
    scorer,
    ds: Dataset,
    numeric_batch: PerturbationBatch | None = None,
    cat_batch: PerturbationBatch | None = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Original predictions (n,) and perturbed predictions (n, K)."""
    if numeric_batch is None and cat_batch is None:
        raise ContractError("at least one perturbation batch is required")
    ks = {b.values.shape[1] for b in (numeric_batch, cat_batch) if b is not None}
    if len(ks) != 1:
        raise ContractError("numeric and categorical batches disagree on K")
    k_count = ks.pop()
    columns = [c.name for c in ds.schema]
    yhat = predict(scorer, columns, ds.decoded_rows(), batch_size, threads)
    rows = []
    for k in range(k_count):
        rows.extend(merged_rows(ds, numeric_batch, cat_batch, k))
    flat = predict(scorer, columns, rows, batch_size, threads)
    yhat_ik = flat.reshape(k_count, ds.n_rows).T
    return yhat, yhat_ik


def pdp(
    scorer,
    ds: Dataset,
    column: str,
    grid,
    batch_size: int = DEFAULT_BATCH_SIZE,
    threads: int = 1,
) -> list[tuple[float, float]]:
    """Partial dependence: mean prediction as `column` sweeps the grid."""
    grid = list(grid)
    if not grid:
        raise ContractError("pdp grid must be non-empty")
    j = ds.numeric_index(column)
    columns = [c.name for c in ds.schema]
    curve = []
    for g in grid:
        values = ds.numeric_values.copy()
        values[:, j] = g
        rows = assemble_rows(ds.schema, values, ds.categorical_codes)
        preds = predict(scorer, columns, rows, batch_size, threads)
        curve.append((float(g), float(preds.mean())))
    return curve


def pdp_grid(ds: Dataset, column: str, size: int = 50) -> np.ndarray:
    """Evenly spaced grid over the observed range of a numeric column."""
    j = ds.numeric_index(column)
    col = ds.numeric_values[:, j]
    return np.linspace(col.min(), col.max(), size)
