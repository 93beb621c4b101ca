import itertools

import numpy as np
import pytest

from simplex_thresholds.metrics import (
    ConfusionCounts,
    Score,
    ScoreSpec,
    binary_score,
    confusion_table,
    macro_score,
    objective,
    overall_accuracy,
    per_class_confusions,
    score_partials,
    table_objective,
)
from simplex_thresholds.simplex import barycenter, vertex

F1 = ScoreSpec(Score.F1)


def loop_confusions(labels, predicted, m):
    """Per-class (tn, fp, fn, tp) by direct enumeration of every sample."""
    out = []
    for j in range(m):
        tn = fp = fn = tp = 0
        for y, p in zip(labels, predicted):
            if y == j and p == j:
                tp += 1
            elif y == j:
                fn += 1
            elif p == j:
                fp += 1
            else:
                tn += 1
        out.append((tn, fp, fn, tp))
    return out


# predictions that land on classes 0, 1, 2 under argmax
THREE = np.array([vertex(3, 0), vertex(3, 1), vertex(3, 2)])


class TestConfusions:
    def test_class2_example(self):
        cms = per_class_confusions(THREE, [0, 1, 1], barycenter(3))
        assert cms[1] == ConfusionCounts(tn=1, fp=0, fn=1, tp=1)
        assert cms[0] == ConfusionCounts(2, 0, 0, 1)
        assert cms[2] == ConfusionCounts(2, 1, 0, 0)

    def test_perfect(self):
        labels = [0, 1, 2, 2, 1]
        cms = per_class_confusions(THREE[labels], labels, barycenter(3))
        for j, cm in enumerate(cms):
            nj = labels.count(j)
            assert cm == ConfusionCounts(5 - nj, 0, 0, nj)

    def test_binary_case(self):
        rng = np.random.default_rng(0)
        y2 = rng.uniform(size=200)
        preds = np.column_stack([1 - y2, y2])
        labels = rng.integers(0, 2, 200)
        t = 0.37
        cm = per_class_confusions(preds, labels, (1 - t, t))[1]
        positive = y2 > t
        assert cm.tp == np.sum(positive & (labels == 1))
        assert cm.fp == np.sum(positive & (labels == 0))
        assert cm.fn == np.sum(~positive & (labels == 1))
        assert cm.tn == np.sum(~positive & (labels == 0))

    def test_table_matches_loops(self):
        rng = np.random.default_rng(1)
        for m in (2, 3, 6):
            labels = rng.integers(0, m, 150)
            predicted = rng.integers(0, m, 150)
            assert confusion_table(labels, predicted, m).tolist() == [list(r) for r in loop_confusions(labels, predicted, m)]

    def test_table_candidate_axis(self):
        rng = np.random.default_rng(2)
        labels = rng.integers(0, 4, 50)
        predicted = rng.integers(0, 4, (7, 50))
        batched = confusion_table(labels, predicted, 4)
        for c in range(7):
            np.testing.assert_array_equal(batched[c], confusion_table(labels, predicted[c], 4))

    def test_conservation(self):
        rng = np.random.default_rng(3)
        m, n = 5, 400
        preds = rng.dirichlet(np.ones(m), n)
        labels = rng.integers(0, m, n)
        tau = rng.dirichlet(np.ones(m))
        cms = per_class_confusions(preds, labels, tau)
        support = np.bincount(labels, minlength=m)
        for j, cm in enumerate(cms):
            assert cm.tp + cm.fn == support[j]
            assert cm.fp + cm.tn == n - support[j]
        assert sum(cm.tp for cm in cms) == pytest.approx(n * overall_accuracy(preds, labels, tau), abs=1e-9)

    def test_label_errors(self):
        with pytest.raises(ValueError):
            per_class_confusions(THREE, [0, 1], barycenter(3))
        with pytest.raises(ValueError, match="outside"):
            per_class_confusions(THREE, [0, 1, 3], barycenter(3))

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            ConfusionCounts(1, -1, 0, 0)


class TestScores:
    def test_f1_example(self):
        assert binary_score(F1, ConfusionCounts(1, 0, 1, 1)) == pytest.approx(2 / 3)

    def test_zero_division(self):
        assert binary_score(F1, ConfusionCounts(5, 0, 0, 0)) == 0.0
        assert binary_score(ScoreSpec(Score.F1, zero_division_value=1.0), ConfusionCounts(5, 0, 0, 0)) == 1.0

    def test_linear(self):
        assert binary_score(ScoreSpec(Score.LINEAR), ConfusionCounts(3, 1, 1, 3)) == pytest.approx(0.5)

    @pytest.mark.parametrize(
        "name,expected",
        [
            (Score.ACCURACY, 7 / 10),
            (Score.PRECISION, 3 / 5),
            (Score.RECALL, 3 / 4),
            (Score.F1, 6 / 9),
            (Score.TSS, 3 / 4 + 4 / 6 - 1),
        ],
    )
    def test_formulas(self, name, expected):
        assert binary_score(ScoreSpec(name), ConfusionCounts(tn=4, fp=2, fn=1, tp=3)) == pytest.approx(expected)

    def test_macro_example(self):
        cms = per_class_confusions(THREE, [0, 1, 1], barycenter(3))
        assert macro_score(F1, cms) == pytest.approx(5 / 9)
        assert overall_accuracy(THREE, [0, 1, 1], barycenter(3)) == pytest.approx(2 / 3)

    def test_macro_identical(self):
        cm = ConfusionCounts(4, 2, 1, 3)
        assert macro_score(F1, [cm] * 4) == pytest.approx(binary_score(F1, cm))

    def test_macro_perfect_and_wrong(self):
        labels = [0, 1, 2, 0]
        assert macro_score(F1, per_class_confusions(THREE[labels], labels, barycenter(3))) == 1.0
        wrong = [1, 2, 0, 1]
        assert overall_accuracy(THREE[wrong], labels, barycenter(3)) == 0.0

    def test_macro_empty(self):
        with pytest.raises(ValueError):
            macro_score(F1, [])

    def test_objective_accuracy_is_overall(self):
        cms = per_class_confusions(THREE, [0, 1, 1], barycenter(3))
        assert objective(ScoreSpec(Score.ACCURACY), cms) == pytest.approx(2 / 3)
        # mean of per-class binary accuracies differs: (1 + 2/3 + 2/3) / 3
        assert objective(ScoreSpec(Score.MACRO_ACCURACY), cms) == pytest.approx(7 / 9)

    def test_table_objective_matches(self):
        rng = np.random.default_rng(4)
        labels = rng.integers(0, 4, 80)
        predicted = rng.integers(0, 4, 80)
        table = confusion_table(labels, predicted, 4)
        cms = [ConfusionCounts(*map(float, r)) for r in table]
        for name in Score:
            spec = ScoreSpec(name)
            assert float(table_objective(spec, table)) == pytest.approx(objective(spec, cms), abs=1e-15)


@pytest.mark.parametrize("name", list(Score))
def test_monotonicity_audit(name):
    spec = ScoreSpec(name)
    vals = range(0, 21, 4)
    for tn, fp, fn, tp in itertools.product(vals, repeat=4):
        base = binary_score(spec, ConfusionCounts(tn, fp, fn, tp))
        assert binary_score(spec, ConfusionCounts(tn, fp, fn, tp + 1)) >= base - 1e-12
        assert binary_score(spec, ConfusionCounts(tn + 1, fp, fn, tp)) >= base - 1e-12
        assert binary_score(spec, ConfusionCounts(tn, fp + 1, fn, tp)) <= base + 1e-12
        assert binary_score(spec, ConfusionCounts(tn, fp, fn + 1, tp)) <= base + 1e-12


@pytest.mark.parametrize("name", list(Score))
def test_partials_match_finite_differences(name):
    spec = ScoreSpec(name)
    base = np.array([7.3, 2.1, 3.4, 5.9])
    v, *d = score_partials(spec, *base)
    assert float(v) == pytest.approx(binary_score(spec, ConfusionCounts(*base)), abs=1e-10)
    h = 1e-6
    for i in range(4):
        up, dn = base.copy(), base.copy()
        up[i] += h
        dn[i] -= h
        fd = (score_partials(spec, *up)[0] - score_partials(spec, *dn)[0]) / (2 * h)
        assert float(d[i]) == pytest.approx(float(fd), abs=1e-8)


def test_barycenter_matches_argmax():
    rng = np.random.default_rng(5)
    preds = rng.dirichlet(np.ones(4), 300)
    labels = rng.integers(0, 4, 300)
    cms = per_class_confusions(preds, labels, barycenter(4))
    expected = loop_confusions(labels, preds.argmax(axis=1), 4)
    assert [cm.as_tuple() for cm in cms] == [tuple(map(float, r)) for r in expected]
    assert overall_accuracy(preds, labels, barycenter(4)) == np.mean(preds.argmax(axis=1) == labels)
