import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelflip.dataset import (
    DatasetError,
    LabeledDataset,
    SplitSpec,
    SyscallTrace,
    featurize_3gram,
    generate_synthetic,
    load_csv,
    save_csv,
    split,
    split_indices,
)
from labelflip.models import predict_batch, train

from conftest import make_dataset


class TestLabeledDataset:
    def test_rejects_mismatched_labels(self):
        with pytest.raises(DatasetError):
            make_dataset([[1, 2], [3, 4]], [0])

    def test_rejects_duplicate_names(self):
        with pytest.raises(DatasetError, match="duplicate"):
            make_dataset([[1, 2]], [0], names=["a", "a"])

    @pytest.mark.parametrize("bad", [-1.0, np.inf, np.nan])
    def test_rejects_bad_values(self, bad):
        with pytest.raises(DatasetError):
            make_dataset([[1, bad]], [1])

    def test_rejects_non_binary_labels(self):
        with pytest.raises(DatasetError):
            make_dataset([[1.0]], [2])

    def test_arrays_are_read_only(self):
        ds = make_dataset([[1, 2]], [1])
        with pytest.raises(ValueError):
            ds.rows[0, 0] = 5
        with pytest.raises(ValueError):
            ds.labels[0] = 0

    def test_empty_dataset(self):
        ds = make_dataset(np.zeros((0, 3)), [])
        assert len(ds) == 0 and ds.n_features == 3


class TestCsv:
    def test_direct_parse(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("f1,f2,label\n1,0,1\n0,2,0\n")
        ds = load_csv(p)
        assert ds.feature_names == ("f1", "f2")
        assert ds.rows.tolist() == [[1.0, 0.0], [0.0, 2.0]]
        assert ds.labels.tolist() == [1, 0]

    def test_label_column_anywhere(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("label,a,b\n1,3,4\n")
        ds = load_csv(p)
        assert ds.feature_names == ("a", "b") and ds.labels.tolist() == [1]

    def test_bad_label_names_row(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("f1,label\n1,0\n1,2\n")
        with pytest.raises(DatasetError, match=r":3: label '2'"):
            load_csv(p)

    def test_header_only(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("f1,f2,label\n")
        ds = load_csv(p)
        assert len(ds) == 0 and ds.n_features == 2

    def test_missing_label_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("f1,f2\n1,2\n")
        with pytest.raises(DatasetError, match="label"):
            load_csv(p)

    def test_non_numeric_cell(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("f1,f2,label\n1,x,0\n")
        with pytest.raises(DatasetError, match=r":2: column 'f2'"):
            load_csv(p)

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("f1,f2,label\n1,2,0\n1,0\n")
        with pytest.raises(DatasetError, match=r":3: expected 3 fields"):
            load_csv(p)

    @settings(max_examples=60, deadline=None)
    @given(
        st.integers(0, 8).flatmap(
            lambda n: st.tuples(
                st.lists(
                    st.lists(st.floats(0, 1e12, allow_nan=False, allow_infinity=False),
                             min_size=3, max_size=3),
                    min_size=n, max_size=n),
                st.lists(st.integers(0, 1), min_size=n, max_size=n),
            )
        )
    )
    def test_round_trip_is_exact(self, tmp_path_factory, rows_labels):
        rows, labels = rows_labels
        ds = make_dataset(np.array(rows, dtype=float).reshape(len(rows), 3), labels,
                          names=["a|b|c", "x", "label2"])
        path = tmp_path_factory.mktemp("rt") / "d.csv"
        save_csv(ds, path)
        back = load_csv(path)
        assert back == ds
        assert np.array_equal(back.rows.view(np.int64), ds.rows.view(np.int64))


class TestFeaturize:
    def test_counts(self):
        ds = featurize_3gram([(["open", "read", "write", "read"], 1)])
        assert dict(zip(ds.feature_names, ds.rows[0])) == {
            "open|read|write": 1, "read|write|read": 1}
        assert ds.labels.tolist() == [1]

    def test_short_trace_gives_zero_row(self):
        ds = featurize_3gram([(["a", "b"], 0), (["a", "b", "c"], 1)])
        assert ds.rows[0].tolist() == [0.0]

    def test_overlapping_windows(self):
        ds = featurize_3gram([(SyscallTrace(("a", "a", "a", "a")), 0)])
        assert ds.feature_names == ("a|a|a",) and ds.rows[0, 0] == 2

    def test_vocabulary_drops_unknown(self):
        ds = featurize_3gram([(["a", "b", "c", "d"], 0)], vocabulary=["b|c|d", "z|z|z"])
        assert ds.feature_names == ("b|c|d", "z|z|z")
        assert ds.rows.tolist() == [[1.0, 0.0]]

    def test_vocabulary_must_be_distinct(self):
        with pytest.raises(DatasetError):
            featurize_3gram([], vocabulary=["a|b|c", "a|b|c"])

    def test_empty_call_name_rejected(self):
        with pytest.raises(DatasetError):
            SyscallTrace(("open", ""))

    @settings(max_examples=200)
    @given(st.lists(st.lists(st.sampled_from("abcd"), max_size=12), min_size=1, max_size=6))
    def test_row_sum_is_window_count(self, traces):
        ds = featurize_3gram([(t, 0) for t in traces])
        for trace, row in zip(traces, ds.rows):
            assert row.sum() == max(0, len(trace) - 2)
        assert list(ds.feature_names) == sorted(ds.feature_names)


class TestSplit:
    def test_sizes(self):
        ds = make_dataset(np.arange(10).reshape(10, 1), [0, 1] * 5)
        train, test = split(ds, SplitSpec(0.6, 0.2, seed=1))
        assert len(train) == 6 and len(test) == 2

    def test_deterministic(self, synthetic):
        a = split_indices(synthetic, SplitSpec(seed=5))
        b = split_indices(synthetic, SplitSpec(seed=5))
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_balanced_strata(self):
        # frozen by enumerating seeds 0..49: every seed lands on exactly 30/30
        ds = make_dataset(np.arange(100).reshape(100, 1), [0, 1] * 50)
        for seed in range(50):
            train, test = split(ds, SplitSpec(0.6, 0.2, seed=seed))
            n0, n1 = train.class_counts()
            assert abs(n0 - 30) <= 1 and abs(n1 - 30) <= 1
            assert test.class_counts() == (10, 10)

    def test_fold_remainder(self):
        ds = make_dataset(np.arange(10).reshape(10, 1), [0, 1] * 5)
        train, test = split(ds, SplitSpec(0.6, 0.2, seed=1, fold_remainder=True))
        assert len(train) == 8 and len(test) == 2

    def test_empty_stratum(self):
        ds = make_dataset(np.arange(10).reshape(10, 1), [0] * 10)
        with pytest.raises(DatasetError, match="malign"):
            split(ds, SplitSpec())
        train, test = split(ds, SplitSpec(stratify=False))
        assert len(train) == 6

    def test_infeasible_fraction(self):
        ds = make_dataset(np.arange(3).reshape(3, 1), [0, 1, 0])
        with pytest.raises(DatasetError):
            split(ds, SplitSpec(0.6, 0.2))

    @pytest.mark.parametrize("fractions", [(1.0, 0.2), (0.0, 0.2), (0.7, 0.4)])
    def test_bad_spec(self, fractions):
        with pytest.raises(DatasetError):
            SplitSpec(*fractions)

    @settings(max_examples=300, deadline=None)
    @given(
        n=st.integers(2, 300),
        p_malign=st.floats(0.05, 0.95),
        train_fraction=st.floats(0.05, 0.9),
        test_share=st.floats(0.05, 1.0),
        seed=st.integers(0, 2**32),
        stratify=st.booleans(),
    )
    def test_partition_properties(self, n, p_malign, train_fraction, test_share, seed, stratify):
        test_fraction = min(0.95, (1 - train_fraction) * test_share)
        spec = SplitSpec(train_fraction, test_fraction, seed, stratify=stratify)
        labels = (np.arange(n) < round(p_malign * n)).astype(int)
        if stratify and labels.sum() in (0, n):
            return
        ds = make_dataset(np.arange(n).reshape(n, 1), labels)
        n_train = math.floor(train_fraction * n + 1e-9)
        n_test = math.floor(test_fraction * n + 1e-9)
        if n_train < 1 or n_test < 1:
            with pytest.raises(DatasetError):
                split_indices(ds, spec)
            return
        tr, te = split_indices(ds, spec)
        assert len(tr) == n_train and len(te) == n_test
        assert not set(tr) & set(te)
        if stratify:
            for part in (tr, te):
                expected = labels.mean() * len(part)
                assert abs(labels[part].sum() - expected) <= 1 + 1e-9


class TestSynthetic:
    def test_shape_and_balance(self):
        ds = generate_synthetic(40, 7, 1.0, seed=2)
        assert len(ds) == 80 and ds.n_features == 7
        assert ds.class_counts() == (40, 40)
        assert (ds.rows >= 0).all() and np.array_equal(ds.rows, np.round(ds.rows))
        assert all(n.count("|") == 2 for n in ds.feature_names)

    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        save_csv(generate_synthetic(30, 5, 2.0, seed=9), a)
        save_csv(generate_synthetic(30, 5, 2.0, seed=9), b)
        assert a.read_bytes() == b.read_bytes()
        assert generate_synthetic(30, 5, 2.0, seed=10) != generate_synthetic(30, 5, 2.0, seed=9)

    def test_zero_separation_is_chance(self):
        accs = {"DecisionTree": [], "LogisticRegression": []}
        for seed in range(10):
            ds = generate_synthetic(200, 10, 0.0, seed=seed)
            tr, te = split(ds, SplitSpec(0.6, 0.2, seed=seed))
            for kind in accs:
                pred, _ = predict_batch(train(kind, None, tr, seed), te)
                accs[kind].append(np.mean(pred == te.labels))
        for kind, values in accs.items():
            assert abs(np.mean(values) - 0.5) <= 0.05, (kind, values)

    def test_high_separation_tree(self):
        ds = generate_synthetic(1000, 50, 3.0, seed=7)
        tr, te = split(ds, SplitSpec(0.6, 0.2, seed=0))
        pred, _ = predict_batch(train("DecisionTree", None, tr, 0), te)
        assert np.mean(pred == te.labels) >= 0.95

    def test_invalid_arguments(self):
        with pytest.raises(DatasetError):
            generate_synthetic(0, 3)
        with pytest.raises(DatasetError):
            generate_synthetic(3, 3, separation=-1)
