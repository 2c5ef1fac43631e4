from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelflip.metrics import (
    ConfusionMatrix,
    MetricsError,
    RocCurve,
    auc,
    confusion,
    metrics_from_cm,
    read_roc_csv,
    roc,
    roc_auc,
    write_roc_csv,
)


def pairwise_auc(scores, truth):
    """P(malign score > benign score) + 1/2 P(tie), over all pairs."""
    s, y = np.asarray(scores), np.asarray(truth)
    pos, neg = s[y == 1], s[y == 0]
    greater = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (greater + 0.5 * ties) / (len(pos) * len(neg))


class TestConfusion:
    def test_perfect(self):
        truth = [0] * 50 + [1] * 50
        assert confusion(truth, truth) == ConfusionMatrix(tp=50, fp=0, tn=50, fn=0)

    def test_inverted(self):
        truth = np.array([0, 1] * 20)
        cm = confusion(1 - truth, truth)
        assert cm.tp == 0 and cm.tn == 0 and cm.total == 40

    def test_all_benign_predictions(self):
        truth = [0, 1] * 10
        cm = confusion([0] * 20, truth)
        assert cm.fn == 10 and cm.tn == 10

    def test_length_mismatch(self):
        with pytest.raises(MetricsError):
            confusion([0, 1], [0])

    def test_non_binary(self):
        with pytest.raises(MetricsError):
            confusion([0, 2], [0, 1])


class TestThresholdMetrics:
    def test_symmetric_counts(self):
        m = metrics_from_cm(ConfusionMatrix(1, 1, 1, 1))
        assert (m.accuracy, m.precision, m.recall, m.f1) == (0.5, 0.5, 0.5, 0.5)

    def test_undefined_precision(self):
        m = metrics_from_cm(ConfusionMatrix(tp=0, fp=0, tn=10, fn=10))
        assert m.precision == 0 and m.precision_undefined
        assert m.recall == 0 and not m.recall_undefined
        assert m.f1 == 0

    def test_hand_arithmetic(self):
        m = metrics_from_cm(ConfusionMatrix(tp=9, fp=1, tn=7, fn=3))
        p, r = Fraction(9, 10), Fraction(9, 12)
        assert m.precision == pytest.approx(float(p), abs=1e-15)
        assert m.recall == pytest.approx(float(r), abs=1e-15)
        assert m.f1 == pytest.approx(float(2 * p * r / (p + r)), abs=1e-15)
        assert m.f1 == pytest.approx(0.8182, abs=5e-5)
        assert m.specificity == pytest.approx(7 / 8)

    def test_empty(self):
        with pytest.raises(MetricsError):
            metrics_from_cm(ConfusionMatrix(0, 0, 0, 0))

    @settings(max_examples=200)
    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
    def test_accuracy_identity(self, pairs):
        p, y = map(np.array, zip(*pairs))
        assert metrics_from_cm(confusion(p, y)).accuracy == pytest.approx(np.mean(p == y))


class TestRoc:
    def test_perfect_separation(self):
        curve = roc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])
        assert (0.0, 1.0) in curve.points
        assert auc(curve) == 1.0

    def test_all_equal_scores(self):
        curve = roc([0.3] * 6, [0, 1, 0, 1, 1, 0])
        assert curve.points == [(0.0, 0.0), (1.0, 1.0)]
        assert auc(curve) == 0.5

    def test_reversed_ranking(self):
        assert roc_auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0

    def test_diagonal_and_step_curves(self):
        assert auc(RocCurve((0.0, 1.0), (0.0, 1.0))) == 0.5
        assert auc(RocCurve((0.0, 0.0, 1.0), (0.0, 1.0, 1.0))) == 1.0

    def test_single_class(self):
        with pytest.raises(MetricsError):
            roc([0.1, 0.2], [1, 1])

    def test_invalid_curve(self):
        with pytest.raises(MetricsError):
            RocCurve((0.0, 0.5), (0.0, 1.0))
        with pytest.raises(MetricsError):
            RocCurve((0.0, 0.6, 0.4, 1.0), (0.0, 0.5, 0.6, 1.0))

    def test_one_point_per_distinct_score(self):
        curve = roc([0.9, 0.9, 0.5, 0.1, 0.1], [1, 0, 1, 0, 1])
        assert len(curve) == 4
        assert curve.thresholds[1:] == (0.9, 0.5, 0.1)

    def test_random_scores_near_half(self):
        values = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            y = np.repeat([0, 1], 1000)
            values.append(roc_auc(rng.random(2000), y))
        assert abs(np.mean(values) - 0.5) <= 0.03

    def test_csv_round_trip(self, tmp_path):
        curve = roc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
        write_roc_csv(curve, tmp_path / "roc.csv")
        back = read_roc_csv(tmp_path / "roc.csv")
        assert back.points == curve.points

    @settings(max_examples=300, deadline=None)
    @given(st.integers(2, 300), st.integers(1, 20), st.integers(0, 2**32 - 1))
    def test_matches_pairwise_oracle(self, n, levels, seed):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, size=n)
        y[0], y[1] = 0, 1
        scores = rng.integers(0, levels, size=n) / levels  # coarse grid forces ties
        assert abs(roc_auc(scores, y) - pairwise_auc(scores, y)) <= 1e-9

    @settings(max_examples=100, deadline=None)
    @given(st.integers(2, 200), st.integers(0, 2**32 - 1))
    def test_monotone_map_invariance(self, n, seed):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, size=n)
        y[0], y[1] = 0, 1
        s = rng.normal(size=n).round(1)
        a, b = roc(s, y), roc(np.exp(3 * s) + 2, y)
        assert a.points == b.points
        assert auc(a) == auc(b)

    @settings(max_examples=100)
    @given(st.lists(st.floats(0, 1), min_size=2, max_size=50), st.integers(0, 2**32 - 1))
    def test_curve_shape(self, scores, seed):
        y = np.random.default_rng(seed).integers(0, 2, size=len(scores))
        y[0], y[1] = 0, 1
        curve = roc(scores, y)
        f, t = np.array(curve.fpr), np.array(curve.tpr)
        assert (f >= 0).all() and (f <= 1).all() and (t >= 0).all() and (t <= 1).all()
        assert 0.0 <= auc(curve) <= 1.0
