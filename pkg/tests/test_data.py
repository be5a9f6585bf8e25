import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ciex.data import (
    ColumnKind,
    ColumnMeta,
    Dataset,
    EmptySplitWarning,
    SchemaError,
    SplitSpec,
    SynthSpec,
    TrainState,
    concat,
    filter_year,
    from_arrays,
    load_csv,
    load_schema,
    save_csv,
    save_schema,
    schema_of,
    split,
    split_sizes,
    synth_credit,
)

SCHEMA = [("income", "numeric"), ("owner", "categorical"), ("region", "categorical")]


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestColumns:
    @pytest.mark.parametrize("card,kind", [(1, ColumnKind.CATEGORICAL_A), (2, ColumnKind.CATEGORICAL_A), (3, ColumnKind.CATEGORICAL_B), (40, ColumnKind.CATEGORICAL_B)])
    def test_grouping_rule(self, card, kind):
        assert ColumnMeta.categorical("c", card).kind is kind

    def test_inconsistent_kind(self):
        with pytest.raises(ValueError):
            ColumnMeta("c", ColumnKind.CATEGORICAL_A, 5)


class TestDataset:
    def test_validation(self):
        X = np.zeros((3, 2))
        with pytest.raises(ValueError):
            from_arrays(X, row_ids=[1, 1, 2])
        with pytest.raises(ValueError):
            from_arrays(X, [0, 2, 1])
        with pytest.raises(ValueError):
            from_arrays(X, weights=[1.0, 0.0, 1.0])

    def test_immutable(self):
        ds = from_arrays(np.zeros((3, 2)), [0, 1, 0])
        with pytest.raises(ValueError):
            ds.values[0, 0] = 1.0
        with pytest.raises(ValueError):
            ds.labels[0] = 1

    def test_take_and_ids(self):
        ds = from_arrays(np.arange(10.0).reshape(5, 2), [0, 1, 0, 1, 1], row_ids=[10, 11, 12, 13, 14])
        sub = ds.select_ids([13, 10])
        assert sub.row_ids.tolist() == [13, 10]
        assert sub.X[:, 0].tolist() == [6.0, 0.0]
        assert ds.drop_ids([11, 12]).row_ids.tolist() == [10, 13, 14]
        with pytest.raises(KeyError):
            ds.select_ids([99])

    def test_concat(self):
        a = from_arrays(np.zeros((2, 1)), [0, 1])
        b = from_arrays(np.ones((3, 1)), [1, 1, 0], row_ids=[5, 6, 7])
        c = concat(a, b)
        assert len(c) == 5 and c.labels.tolist() == [0, 1, 1, 1, 0]
        with pytest.raises(ValueError):
            concat(a, a)


class TestCSV:
    def test_four_rows(self, tmp_path):
        p = write(tmp_path / "a.csv", "income,owner,region,y\n1,Y,n,0\n2,N,s,1\n3,Y,e,0\n4,N,w,1\n")
        ds = load_csv(p, SCHEMA, "y")
        assert len(ds) == 4
        assert ds.labels.tolist() == [0, 1, 0, 1]
        assert [c.kind for c in ds.columns] == [ColumnKind.NUMERIC, ColumnKind.CATEGORICAL_A, ColumnKind.CATEGORICAL_B]

    def test_bad_label(self, tmp_path):
        p = write(tmp_path / "a.csv", "income,owner,region,y\n1,Y,n,0\n2,N,s,2\n")
        with pytest.raises(SchemaError):
            load_csv(p, SCHEMA, "y")

    def test_missing_column(self, tmp_path):
        p = write(tmp_path / "a.csv", "income,owner,y\n1,Y,0\n")
        with pytest.raises(SchemaError):
            load_csv(p, SCHEMA, "y")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "nope.csv", SCHEMA)

    def test_blank_cells_counted(self, tmp_path):
        text = "income,owner,region,y\n1,Y,n,0\n,N,s,1\n3,,e,0\n,N,,1\n"
        p = write(tmp_path / "a.csv", text)
        ds = load_csv(p, SCHEMA, "y")
        # line-scan oracle: count empty fields per column
        lines = [ln.split(",") for ln in text.strip().splitlines()[1:]]
        for j, (name, _) in enumerate(SCHEMA):
            assert ds.missing_count(name) == sum(1 for ln in lines if ln[j] == "")
        assert ds.missing_count("income") == 2

    def test_round_trip(self, tmp_path):
        acc, _, _ = synth_credit(20, 5, 0.3, 1, year=2018)
        save_csv(acc, tmp_path / "acc.csv")
        save_schema(schema_of(acc), tmp_path / "schema.csv")
        back = load_csv(tmp_path / "acc.csv", load_schema(tmp_path / "schema.csv"), "label")
        np.testing.assert_array_equal(back.X, acc.X)
        np.testing.assert_array_equal(back.labels, acc.labels)
        np.testing.assert_array_equal(back.dates, acc.dates)

    def test_schema_file_errors(self, tmp_path):
        p = write(tmp_path / "s.csv", "name,kind\nx,numeric\ny,text\n")
        with pytest.raises(SchemaError):
            load_schema(p)


class TestSplit:
    def test_sizes(self):
        parts = split(from_arrays(np.zeros((100, 1))), SplitSpec(fractions=(0.7, 0.3), seed=42))
        assert [len(p) for p in parts] == [70, 30]

    def test_deterministic(self):
        ds = from_arrays(np.zeros((100, 1)))
        a = split(ds, SplitSpec(fractions=(0.5, 0.5), seed=3))
        b = split(ds, SplitSpec(fractions=(0.5, 0.5), seed=3))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.row_ids, y.row_ids)

    @given(st.integers(0, 300), st.lists(st.integers(1, 10), min_size=1, max_size=5), st.integers(0, 1000))
    def test_partition(self, n, raw, seed):
        fr = np.array(raw, float) / sum(raw)
        fr[-1] = 1.0 - fr[:-1].sum()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptySplitWarning)
            parts = split(from_arrays(np.zeros((n, 1))), SplitSpec(fractions=tuple(fr), seed=seed))
        ids = np.concatenate([p.row_ids for p in parts])
        assert sorted(ids.tolist()) == list(range(n))
        assert sum(split_sizes(n, fr)) == n

    def test_fractions_must_sum(self):
        with pytest.raises(ValueError):
            SplitSpec(fractions=(0.5, 0.4))

    def test_temporal_quarters(self):
        dates = np.array([f"2019-{m:02d}-15" for m in range(1, 13)], dtype="datetime64[D]")
        ds = from_arrays(np.zeros((12, 1)), dates=dates)
        train, test = split(ds, SplitSpec.year_quarters(2019))
        assert (len(train), len(test)) == (9, 3)

    def test_empty_partition_warns(self):
        dates = np.array(["2019-01-15"] * 3, dtype="datetime64[D]")
        with pytest.warns(EmptySplitWarning):
            split(from_arrays(np.zeros((3, 1)), dates=dates), SplitSpec.year_quarters(2019))

    def test_filter_year(self):
        dates = np.array(["2018-12-31", "2019-01-01", "2019-06-01", "2020-01-01"], dtype="datetime64[D]")
        ds = from_arrays(np.zeros((4, 1)), dates=dates)
        assert filter_year(ds, 2019).row_ids.tolist() == [1, 2]


class TestSynth:
    def test_unbiased_means_match(self):
        acc, rej, _ = synth_credit(5000, 5000, 0.0, 0)
        diff = acc.X.mean(0) - rej.X.mean(0)
        se = np.sqrt(acc.X.var(0) / 5000 + rej.X.var(0) / 5000)
        assert (np.abs(diff) < 3 * se).all()

    def test_biased_shift(self):
        spec = SynthSpec()
        acc, rej, _ = synth_credit(5000, 5000, 1.0, 1, spec)
        diff = rej.X.mean(0) - acc.X.mean(0)
        se = np.sqrt(acc.X.var(0) / 5000 + rej.X.var(0) / 5000)
        assert (np.abs(diff - spec.mean_shift(1.0)) < 3 * se).all()

    def test_deterministic(self):
        a = synth_credit(50, 60, 0.5, 7)
        b = synth_credit(50, 60, 0.5, 7)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.X, y.X)
            np.testing.assert_array_equal(x.row_ids, y.row_ids)

    def test_hidden_labels(self):
        acc, rej, hidden = synth_credit(30, 40, 0.5, 2)
        assert rej.labels is None and hidden.labels is not None
        np.testing.assert_array_equal(rej.row_ids, hidden.row_ids)
        assert np.intersect1d(acc.row_ids, rej.row_ids).size == 0

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            synth_credit(0, 10, 0.5, 0)
        with pytest.raises(ValueError):
            synth_credit(10, 10, 1.5, 0)


class TestTrainState:
    def test_initial(self):
        acc, rej, hidden = synth_credit(30, 40, 0.5, 2)
        s = TrainState.initial(acc, hidden)
        assert s.total == 70 and s.rejects.labels is None
        assert (s.labeled.provenance == 0).all()

    def test_overlap_rejected(self):
        acc, rej, _ = synth_credit(30, 40, 0.5, 2)
        with pytest.raises(ValueError):
            TrainState(acc, acc.without_labels())
