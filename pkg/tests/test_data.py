import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustkit.data import (
    ColumnSchema,
    column_stats,
    extract_envelope,
    load_dataset,
    pearson_correlation,
    quantile_buckets,
    write_dataset,
)
from robustkit.errors import ContractError, InsufficientDataError, SchemaError

from conftest import make_dataset


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


SCHEMA_2COL = [
    ColumnSchema("x", "continuous"),
    ColumnSchema("grade", "categorical", levels=("a", "b")),
]


class TestLoadDataset:
    def test_round_trip_small(self, tmp_path):
        f = tmp_path / "d.csv"
        write_csv(f, ["x", "grade"], [[1.5, "a"], [2.0, "b"], [3.25, "a"]])
        ds = load_dataset(f, SCHEMA_2COL)
        assert ds.n_rows == 3 and ds.p_num == 1 and ds.p_cat == 1
        assert ds.categorical_codes[:, 0].tolist() == [0, 1, 0]
        out = tmp_path / "o.csv"
        write_dataset(out, ds)
        ds2 = load_dataset(out, SCHEMA_2COL)
        np.testing.assert_allclose(ds2.numeric_values, ds.numeric_values, rtol=1e-12)
        assert np.array_equal(ds2.categorical_codes, ds.categorical_codes)

    def test_unknown_level_rejected(self, tmp_path):
        f = tmp_path / "d.csv"
        write_csv(f, ["x", "grade"], [[1.0, "graduate"]])
        with pytest.raises(SchemaError, match="graduate"):
            load_dataset(f, SCHEMA_2COL)

    def test_non_numeric_token_rejected(self, tmp_path):
        f = tmp_path / "d.csv"
        write_csv(f, ["x", "grade"], [["oops", "a"]])
        with pytest.raises(SchemaError, match="oops"):
            load_dataset(f, SCHEMA_2COL)

    def test_missing_column_rejected(self, tmp_path):
        f = tmp_path / "d.csv"
        write_csv(f, ["x"], [[1.0]])
        with pytest.raises(SchemaError, match="grade"):
            load_dataset(f, SCHEMA_2COL)

    def test_response_split_off(self, tmp_path):
        f = tmp_path / "d.csv"
        write_csv(f, ["x", "grade", "y"], [[1.0, "a", 0], [2.0, "b", 1]])
        ds = load_dataset(f, SCHEMA_2COL, response_column="y")
        assert ds.response.tolist() == [0.0, 1.0]


class TestColumnStats:
    def test_sample_sd(self):
        ds = make_dataset({"x": [1, 2, 3, 4, 5]})
        st_ = column_stats(ds)
        assert st_.sigma[0] == pytest.approx(math.sqrt(2.5))
        assert st_.min[0] == 1 and st_.max[0] == 5

    def test_constant_column_sigma_zero(self):
        ds = make_dataset({"x": [7, 7, 7]})
        assert column_stats(ds).sigma[0] == 0.0

    def test_needs_two_rows(self):
        ds = make_dataset({"x": [1.0]})
        with pytest.raises(InsufficientDataError):
            column_stats(ds)


class TestPearsonCorrelation:
    def test_identical_columns(self):
        ds = make_dataset({"a": [1, 2, 3, 4], "b": [1, 2, 3, 4]})
        corr = pearson_correlation(ds)
        assert corr.matrix[0, 1] == pytest.approx(1.0)
        assert corr.repaired  # semidefinite matrix needed jitter
        np.testing.assert_allclose(
            corr.factor @ corr.factor.T,
            corr.matrix + corr.jitter_used * np.eye(2),
            atol=1e-8,
        )

    def test_independent_columns_near_zero(self, rng):
        ds = make_dataset({"a": rng.standard_normal(10_000), "b": rng.standard_normal(10_000)})
        assert abs(pearson_correlation(ds).matrix[0, 1]) < 0.05

    def test_permutation_equivariance(self, rng):
        x = rng.standard_normal((50, 3))
        ds1 = make_dataset({"a": x[:, 0], "b": x[:, 1], "c": x[:, 2]})
        ds2 = make_dataset({"c": x[:, 2], "a": x[:, 0], "b": x[:, 1]})
        m1, m2 = pearson_correlation(ds1).matrix, pearson_correlation(ds2).matrix
        perm = [1, 2, 0]  # position of a,b,c within ds2
        np.testing.assert_allclose(m1, m2[np.ix_(perm, perm)], atol=1e-12)

    def test_zero_variance_column_pinned(self):
        ds = make_dataset({"a": [1, 2, 3, 4], "c": [5, 5, 5, 5]})
        m = pearson_correlation(ds).matrix
        assert m[0, 1] == 0.0 and m[1, 1] == 1.0


class TestQuantileBuckets:
    def test_uniform_spread_homogeneous(self, rng):
        ds = make_dataset({"u": rng.uniform(0, 1, 20_000)})
        spec = quantile_buckets(ds, q_count=10)
        s = spec.s[0]
        assert s.max() <= 1.2 * s.min()

    def test_lognormal_top_bucket_heavy(self, rng):
        ds = make_dataset({"ln": rng.lognormal(0, 1, 20_000)})
        spec = quantile_buckets(ds, q_count=10)
        s = spec.s[0]
        assert s[-1] > 3 * s[len(s) // 2]

    def test_constant_column_all_zero(self):
        ds = make_dataset({"c": [3.0] * 100})
        spec = quantile_buckets(ds, q_count=5)
        assert (spec.s[0] == 0).all()

    def test_populations_partition_rows(self, rng):
        from robustkit.data import bucket_of

        ds = make_dataset({"x": rng.standard_normal(500)})
        spec = quantile_buckets(ds, q_count=10)
        which = bucket_of(ds.numeric_values[:, 0], spec.edges[0])
        assert len(which) == 500
        assert np.bincount(which, minlength=10).sum() == 500

    def test_contract_checks(self):
        ds = make_dataset({"x": [1.0, 2.0, 3.0]})
        with pytest.raises(ContractError):
            quantile_buckets(ds, q_count=1)
        with pytest.raises(ContractError):
            quantile_buckets(ds, q_count=2, window=2)


class TestEnvelope:
    def test_full_cross(self):
        ds = make_dataset(
            categorical={
                "a": (("0", "1"), [0, 0, 1, 1]),
                "b": (("0", "1"), [0, 1, 0, 1]),
            }
        )
        env = extract_envelope(ds)
        assert len(env.combos) == 4

    def test_missing_combo_absent(self):
        ds = make_dataset(
            categorical={
                "working": (("f", "t"), [0, 1, 1]),
                "sunday": (("f", "t"), [0, 0, 1]),
            }
        )
        env = extract_envelope(ds)
        assert (0, 1) not in env.combo_set  # never co-occurred

    def test_all_identical_rows(self):
        ds = make_dataset(categorical={"a": (("x", "y"), [1, 1, 1])})
        assert len(extract_envelope(ds).combos) == 1

    def test_no_categoricals_is_error(self):
        ds = make_dataset({"x": [1.0, 2.0]})
        with pytest.raises(ContractError):
            extract_envelope(ds)

    @given(
        st.lists(
            st.tuples(st.integers(0, 2), st.integers(0, 1)), min_size=1, max_size=50
        )
    )
    @settings(max_examples=50, deadline=None)
    def test_envelope_exactly_observed_combos(self, rows):
        codes_a = [r[0] for r in rows]
        codes_b = [r[1] for r in rows]
        ds = make_dataset(
            categorical={
                "a": (("0", "1", "2"), codes_a),
                "b": (("0", "1"), codes_b),
            }
        )
        env = extract_envelope(ds)
        assert env.combo_set == set(zip(codes_a, codes_b))
