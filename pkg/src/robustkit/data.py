"""Dataset ingestion, schema typing, and the statistics perturbation strategies consume.

A dataset is a typed column store: continuous/discrete columns live in a
float matrix, categorical columns are stored as integer level codes in
schema level order.  All statistics here are pure functions of an
immutable Dataset and safe to share across workers.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, InsufficientDataError, SchemaError

NUMERIC_KINDS = ("continuous", "discrete")


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str  # continuous | discrete | categorical
    levels: tuple[str, ...] = ()
    noise_inflation: float = 1.0

    def __post_init__(self):
        if self.kind not in ("continuous", "discrete", "categorical"):
            raise SchemaError(f"unknown column kind {self.kind!r} for {self.name!r}")
        if (self.kind == "categorical") != bool(self.levels):
            raise SchemaError(
                f"column {self.name!r}: levels must be given iff kind is categorical"
            )
        if len(set(self.levels)) != len(self.levels):
            raise SchemaError(f"column {self.name!r}: duplicate levels")
        if self.noise_inflation <= 0:
            raise SchemaError(f"column {self.name!r}: noise_inflation must be > 0")


def load_schema(path) -> list[ColumnSchema]:
    """Read a schema file: JSON array of {name, kind, levels?, noise_inflation?}."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    cols = [
        ColumnSchema(
            name=c["name"],
            kind=c["kind"],
            levels=tuple(c.get("levels", ())),
            noise_inflation=float(c.get("noise_inflation", 1.0)),
        )
        for c in raw
    ]
    names = [c.name for c in cols]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate column names in schema")
    return cols


@dataclass(frozen=True)
class Dataset:
    schema: tuple[ColumnSchema, ...]
    numeric_values: np.ndarray  # n x p_num, float64
    categorical_codes: np.ndarray  # n x p_cat, int64
    response: np.ndarray | None = None

    def __post_init__(self):
        names = [c.name for c in self.schema]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        if self.numeric_values.shape[0] != self.categorical_codes.shape[0]:
            raise SchemaError("numeric and categorical row counts differ")
        if np.isnan(self.numeric_values).any():
            raise SchemaError("numeric matrix contains NaN after ingestion")
        for j, col in enumerate(self.categorical_columns):
            codes = self.categorical_codes[:, j]
            if codes.size and (codes.min() < 0 or codes.max() >= len(col.levels)):
                raise SchemaError(f"column {col.name!r}: code out of level range")
        if self.response is not None and len(self.response) != self.n_rows:
            raise SchemaError("response length does not match row count")

    @property
    def n_rows(self) -> int:
        return self.numeric_values.shape[0]

    @property
    def numeric_columns(self) -> list[ColumnSchema]:
        return [c for c in self.schema if c.kind in NUMERIC_KINDS]

    @property
    def categorical_columns(self) -> list[ColumnSchema]:
        return [c for c in self.schema if c.kind == "categorical"]

    @property
    def numeric_names(self) -> list[str]:
        return [c.name for c in self.numeric_columns]

    @property
    def categorical_names(self) -> list[str]:
        return [c.name for c in self.categorical_columns]

    @property
    def p_num(self) -> int:
        return self.numeric_values.shape[1]

    @property
    def p_cat(self) -> int:
        return self.categorical_codes.shape[1]

    def numeric_index(self, name: str) -> int:
        return self.numeric_names.index(name)

    def categorical_index(self, name: str) -> int:
        return self.categorical_names.index(name)

    def decoded_rows(self) -> list[list]:
        """Rows in schema column order with categorical codes decoded to labels."""
        return assemble_rows(self.schema, self.numeric_values, self.categorical_codes)


def assemble_rows(schema, numeric_values, categorical_codes) -> list[list]:
    """Merge numeric matrix and categorical codes back into schema-ordered rows."""
    n = numeric_values.shape[0]
    num_cols = [c for c in schema if c.kind in NUMERIC_KINDS]
    cat_cols = [c for c in schema if c.kind == "categorical"]
    num_pos = {c.name: j for j, c in enumerate(num_cols)}
    cat_pos = {c.name: j for j, c in enumerate(cat_cols)}
    rows = []
    for i in range(n):
        row = []
        for col in schema:
            if col.kind == "categorical":
                row.append(col.levels[int(categorical_codes[i, cat_pos[col.name]])])
            else:
                row.append(float(numeric_values[i, num_pos[col.name]]))
        rows.append(row)
    return rows


def load_dataset(path, schema: list[ColumnSchema], response_column: str | None = None) -> Dataset:
    """Load a CSV file against a declared schema.

    CSV contract: UTF-8, header row, comma separator, '.' decimal point;
    categorical cells are literal level labels.  ``response_column`` names a
    numeric column in the file that is split off as the response vector
    (it must not appear in the schema).
    """
    schema = list(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        col_idx = {}
        for col in schema:
            if col.name not in header:
                raise SchemaError(f"{path}: missing column {col.name!r}")
            col_idx[col.name] = header.index(col.name)
        resp_idx = None
        if response_column is not None:
            if response_column not in header:
                raise SchemaError(f"{path}: missing response column {response_column!r}")
            resp_idx = header.index(response_column)

        num_cols = [c for c in schema if c.kind in NUMERIC_KINDS]
        cat_cols = [c for c in schema if c.kind == "categorical"]
        level_maps = {c.name: {lvl: k for k, lvl in enumerate(c.levels)} for c in cat_cols}

        numeric_rows, cat_rows, resp = [], [], []
        for rownum, row in enumerate(reader, start=2):
            nrow = []
            for col in num_cols:
                tok = row[col_idx[col.name]].strip()
                try:
                    nrow.append(float(tok))
                except ValueError:
                    raise SchemaError(
                        f"{path}:{rownum}: non-numeric token {tok!r} in column {col.name!r}"
                    ) from None
            crow = []
            for col in cat_cols:
                tok = row[col_idx[col.name]]
                try:
                    crow.append(level_maps[col.name][tok])
                except KeyError:
                    raise SchemaError(
                        f"{path}:{rownum}: unknown level {tok!r} in column {col.name!r}"
                    ) from None
            numeric_rows.append(nrow)
            cat_rows.append(crow)
            if resp_idx is not None:
                resp.append(float(row[resp_idx]))

    n = len(numeric_rows)
    return Dataset(
        schema=tuple(schema),
        numeric_values=np.asarray(numeric_rows, dtype=float).reshape(n, len(num_cols)),
        categorical_codes=np.asarray(cat_rows, dtype=np.int64).reshape(n, len(cat_cols)),
        response=np.asarray(resp, dtype=float) if resp_idx is not None else None,
    )


def write_dataset(path, ds: Dataset) -> None:
    """Write a Dataset back to the CSV contract (17 significant digits)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([c.name for c in ds.schema])
        for row in ds.decoded_rows():
            writer.writerow(
                [v if isinstance(v, str) else format(v, ".17g") for v in row]
            )


@dataclass(frozen=True)
class ColumnStats:
    sigma: np.ndarray  # per numeric column, sample sd (ddof=1)
    min: np.ndarray
    max: np.ndarray
    mean: np.ndarray


def column_stats(ds: Dataset) -> ColumnStats:
    """Per-numeric-column sample sd (denominator n-1), min, max, mean."""
    if ds.n_rows < 2:
        raise InsufficientDataError("column_stats requires at least 2 rows")
    x = ds.numeric_values
    return ColumnStats(
        sigma=np.std(x, axis=0, ddof=1),
        min=np.min(x, axis=0),
        max=np.max(x, axis=0),
        mean=np.mean(x, axis=0),
    )


def pearson_matrix(x: np.ndarray) -> np.ndarray:
    """Pearson correlation with zero-variance columns pinned to identity rows."""
    p = x.shape[1]
    sig = np.std(x, axis=0, ddof=1)
    live = sig > 0
    corr = np.eye(p)
    if live.sum() >= 2:
        sub = np.corrcoef(x[:, live], rowvar=False)
        sub = np.clip((sub + sub.T) / 2.0, -1.0, 1.0)
        idx = np.flatnonzero(live)
        corr[np.ix_(idx, idx)] = sub
    np.fill_diagonal(corr, 1.0)
    return corr


@dataclass(frozen=True)
class CorrelationModel:
    matrix: np.ndarray  # Pearson correlation, p_num x p_num
    factor: np.ndarray  # lower-triangular, factor @ factor.T == repaired matrix
    repaired: bool
    jitter_used: float


def pearson_correlation(ds: Dataset) -> CorrelationModel:
    """Pearson correlation over numeric columns, with a factorization for sampling."""
    from .noise import factorize_matrix  # local import avoids a cycle

    if ds.n_rows < 2:
        raise InsufficientDataError("pearson_correlation requires at least 2 rows")
    corr = pearson_matrix(ds.numeric_values)
    factor, jitter = factorize_matrix(corr)
    return CorrelationModel(
        matrix=corr, factor=factor, repaired=jitter > 0, jitter_used=jitter
    )


@dataclass(frozen=True)
class BucketSpec:
    edges: np.ndarray  # per column: Q+1 quantile boundaries, (p_num, Q+1)
    s: np.ndarray  # smoothed per-bucket spread, (p_num, Q)
    s_max: np.ndarray  # per column max over buckets
    q_count: int


def _rolling_mean(v: np.ndarray, window: int) -> np.ndarray:
    # centered window, truncated at both ends
    half = window // 2
    out = np.empty_like(v)
    for q in range(len(v)):
        lo, hi = max(0, q - half), min(len(v), q + half + 1)
        out[q] = v[lo:hi].mean()
    return out


def bucket_of(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Map values to bucket indices 0..Q-1 using interior edges."""
    q = len(edges) - 1
    return np.clip(np.searchsorted(edges[1:-1], values, side="right"), 0, q - 1)


def quantile_buckets(ds: Dataset, q_count: int = 20, window: int = 3) -> BucketSpec:
    """Quantile bins per numeric column with rolling-mean-smoothed bucket sds."""
    if q_count < 2:
        raise ContractError("quantile bucket count must be >= 2")
    if window < 1 or window % 2 == 0:
        raise ContractError("rolling window must be a positive odd integer")
    if ds.n_rows < q_count:
        raise InsufficientDataError("need at least one row per bucket")
    x = ds.numeric_values
    p = x.shape[1]
    edges = np.empty((p, q_count + 1))
    s = np.empty((p, q_count))
    probs = np.linspace(0.0, 1.0, q_count + 1)
    for j in range(p):
        col = x[:, j]
        edges[j] = np.quantile(col, probs)
        which = bucket_of(col, edges[j])
        raw = np.zeros(q_count)
        for q in range(q_count):
            vals = col[which == q]
            if len(vals) >= 2:
                raw[q] = np.std(vals, ddof=1)
        s[j] = _rolling_mean(raw, window)
    return BucketSpec(edges=edges, s=s, s_max=s.max(axis=1), q_count=q_count)


@dataclass(frozen=True)
class CategoricalEnvelope:
    combos: tuple[tuple[int, ...], ...]  # sorted distinct code tuples
    p_cat: int
    combo_set: frozenset = field(repr=False, default=frozenset())


def extract_envelope(ds: Dataset) -> CategoricalEnvelope:
    """Distinct categorical code combinations observed in the data."""
    if ds.p_cat == 0:
        raise ContractError("dataset has no categorical columns; envelope is empty")
    combos = sorted({tuple(int(v) for v in row) for row in ds.categorical_codes})
    return CategoricalEnvelope(
        combos=tuple(combos), p_cat=ds.p_cat, combo_set=frozenset(combos)
    )
