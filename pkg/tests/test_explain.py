import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelflip.explain import (
    ExplainError,
    FeatureImportanceRanking,
    gini_importance,
    pareto_top,
    write_ranking_csv,
)
from labelflip.models import ForestParams, TreeParams, train

from conftest import make_dataset


def single_feature_data(seed=0, n=200):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=n)
    informative = y * 3 + rng.integers(0, 2, size=n)  # 0-1 benign, 3-4 malign
    noise = rng.integers(0, 2, size=n) * 0.0 + 5.0  # constant column
    return make_dataset(np.column_stack([noise, informative]), y, names=["const", "key"])


class TestGiniImportance:
    @pytest.mark.parametrize("kind", ["DecisionTree", "RandomForest"])
    def test_single_informative_feature(self, kind):
        data = single_feature_data()
        hp = {"n_trees": 10} if kind == "RandomForest" else None
        ranking = gini_importance(train(kind, hp, data, seed=1))
        assert ranking.entries[0] == ("key", 1.0)
        assert ranking.as_dict()["const"] == 0.0

    def test_equal_strength_features_share_importance(self):
        # label noise of 20% on each of two conditionally independent copies of y
        shares = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            y = rng.integers(0, 2, size=400)
            a = np.where(rng.random(400) < 0.2, 1 - y, y)
            b = np.where(rng.random(400) < 0.2, 1 - y, y)
            data = make_dataset(np.column_stack([a, b]), y, names=["a", "b"])
            model = train("RandomForest", ForestParams(n_trees=30, max_depth=4), data, seed)
            shares.append(gini_importance(model).as_dict()["a"])
        assert abs(np.mean(shares) - 0.5) <= 0.1

    def test_sum_and_nonnegativity(self, synthetic):
        for model in (train("DecisionTree", None, synthetic),
                      train("RandomForest", {"n_trees": 15}, synthetic, seed=2)):
            values = gini_importance(model).importances
            assert (values >= 0).all()
            assert abs(values.sum() - 1.0) <= 1e-9

    def test_no_split_gives_zero_ranking(self):
        data = make_dataset(np.ones((5, 2)), [0, 1, 0, 1, 1])
        ranking = gini_importance(train("DecisionTree", None, data))
        assert ranking.importances.sum() == 0
        with pytest.raises(ExplainError):
            pareto_top(ranking)

    def test_unsupported_kind(self, synthetic):
        with pytest.raises(ExplainError):
            gini_importance(train("Knn", None, synthetic))

    def test_column_permutation(self):
        # continuous features and large leaves make exact Gini ties improbable,
        # so the tree does not depend on the column tie-break
        rng = np.random.default_rng(5)
        y = rng.integers(0, 2, size=300)
        X = np.abs(rng.normal(size=(300, 6)) + np.outer(y, [2.0, 1.0, 0.5, 0, 0, 0]))
        names = [f"c{j}" for j in range(6)]
        perm = rng.permutation(6)
        a = gini_importance(train("DecisionTree", TreeParams(max_depth=3, min_samples_leaf=20),
                                  make_dataset(X, y, names))).as_dict()
        b = gini_importance(train("DecisionTree", TreeParams(max_depth=3, min_samples_leaf=20),
                                  make_dataset(X[:, perm], y, [names[j] for j in perm]))).as_dict()
        for name in names:
            assert a[name] == pytest.approx(b[name], abs=1e-12)


class TestPareto:
    def ranking(self, values):
        return FeatureImportanceRanking(tuple((f"f{i}", v) for i, v in enumerate(values)))

    def test_prefix(self):
        assert pareto_top(self.ranking([0.7, 0.2, 0.1]), 0.8) == ["f0", "f1"]

    def test_full_mass_excludes_zeros(self):
        assert pareto_top(self.ranking([0.5, 0.3, 0.2, 0.0]), 1.0) == ["f0", "f1", "f2"]

    def test_single(self):
        for mass in (0.1, 0.8, 1.0):
            assert pareto_top(self.ranking([1.0]), mass) == ["f0"]

    def test_float_sums(self):
        # ten shares of 0.1 accumulate to 0.9999999999999999, not 1.0
        values = [0.1] * 10
        r = FeatureImportanceRanking.from_weights([f"f{i}" for i in range(10)], values)
        assert len(pareto_top(r, 1.0)) == 10

    @pytest.mark.parametrize("mass", [0.0, 1.5])
    def test_bad_mass(self, mass):
        with pytest.raises(ExplainError):
            pareto_top(self.ranking([1.0]), mass)

    def test_ranking_validation(self):
        with pytest.raises(ExplainError):
            self.ranking([0.2, 0.8])
        with pytest.raises(ExplainError):
            self.ranking([0.5, 0.4])

    def test_from_weights_ties_keep_column_order(self):
        r = FeatureImportanceRanking.from_weights(["x", "y", "z"], [0.25, 0.5, 0.25])
        assert r.names == ["y", "x", "z"]

    @settings(max_examples=200)
    @given(st.lists(st.floats(0.001, 1.0), min_size=1, max_size=12),
           st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    def test_length_monotone_in_mass(self, weights, m1, m2):
        w = np.sort(np.array(weights))[::-1]
        r = FeatureImportanceRanking.from_weights([f"f{i}" for i in range(len(w))], w / w.sum())
        lo, hi = sorted((m1, m2))
        assert len(pareto_top(r, lo)) <= len(pareto_top(r, hi))

    def test_csv_export(self, tmp_path):
        write_ranking_csv(self.ranking([0.6, 0.4]), tmp_path / "r.csv")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines == ["feature,importance,cumulative", "f0,0.6,0.6", "f1,0.4,1.0"]
