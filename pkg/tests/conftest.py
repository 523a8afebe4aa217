import json

import numpy as np
import pytest

from robustkit.data import ColumnSchema, Dataset


def make_dataset(numeric=None, categorical=None, response=None, kinds=None):
    """Assemble a Dataset from plain dicts of column -> values.

    kinds maps numeric column names to 'discrete' (default 'continuous').
    categorical maps column name to (levels, codes).
    """
    numeric = numeric or {}
    categorical = categorical or {}
    kinds = kinds or {}
    schema = []
    num_arrays, cat_arrays = [], []
    for name, vals in numeric.items():
        schema.append(ColumnSchema(name=name, kind=kinds.get(name, "continuous")))
        num_arrays.append(np.asarray(vals, dtype=float))
    for name, (levels, codes) in categorical.items():
        schema.append(ColumnSchema(name=name, kind="categorical", levels=tuple(levels)))
        cat_arrays.append(np.asarray(codes, dtype=np.int64))
    n = len(num_arrays[0]) if num_arrays else len(cat_arrays[0])
    return Dataset(
        schema=tuple(schema),
        numeric_values=np.column_stack(num_arrays) if num_arrays else np.empty((n, 0)),
        categorical_codes=np.column_stack(cat_arrays)
        if cat_arrays
        else np.empty((n, 0), dtype=np.int64),
        response=np.asarray(response, dtype=float) if response is not None else None,
    )


def write_glm(path, link="identity", intercept=0.0, coefficients=None, reference_levels=None):
    doc = {
        "link": link,
        "intercept": intercept,
        "coefficients": coefficients or {},
        "reference_levels": reference_levels or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    return str(path)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
