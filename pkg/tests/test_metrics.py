import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rep.errors import MetricError
from rep.evaluation.metrics import (
    ConfusionCounts,
    accuracy,
    false_positive_rate,
    roc_auc,
    trapezoid,
    true_positive_rate,
)

from oracles import mann_whitney_auc


def test_accuracy_examples():
    assert accuracy(ConfusionCounts(tp=2, tn=1, fp=1, fn=0)) == 0.75
    assert accuracy(ConfusionCounts(tp=3, tn=4)) == 1.0
    assert accuracy(ConfusionCounts(fp=3, fn=4)) == 0.0
    with pytest.raises(MetricError):
        accuracy(ConfusionCounts())


def test_rates():
    c = ConfusionCounts.from_labels([1, 1, -1, -1, 1], [1, -1, 1, -1, 1])
    assert (c.tp, c.fn, c.fp, c.tn) == (2, 1, 1, 1)
    assert true_positive_rate(c) == pytest.approx(2 / 3)
    assert false_positive_rate(c) == 0.5


def test_auc_perfect_and_inverted():
    assert roc_auc([0.9, 0.2], [1, -1]).auc == 1.0
    assert roc_auc([0.2, 0.9], [1, -1]).auc == 0.0


def test_auc_single_class_rejected():
    with pytest.raises(MetricError):
        roc_auc([0.1, 0.2], [1, 1])


def test_auc_matches_pair_counting(rng):
    s = rng.normal(size=50)
    y = rng.choice([-1, 1], size=50)
    assert roc_auc(s, y).auc == pytest.approx(mann_whitney_auc(s, y), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 200), levels=st.sampled_from([2, 5, 0]))
def test_roc_properties(seed, n, levels):
    g = np.random.default_rng(seed)
    y = g.choice([-1, 1], size=n)
    y[0], y[1] = 1, -1
    s = g.integers(0, levels, size=n).astype(float) if levels else g.normal(size=n)
    roc = roc_auc(s, y)
    assert roc.auc == pytest.approx(mann_whitney_auc(s, y), abs=1e-12)
    assert (roc.fpr[0], roc.tpr[0]) == (0.0, 0.0)
    assert (roc.fpr[-1], roc.tpr[-1]) == (1.0, 1.0)
    assert np.all(np.diff(roc.fpr) >= 0) and np.all(np.diff(roc.tpr) >= 0)
    assert roc.auc == pytest.approx(trapezoid(roc.fpr, roc.tpr), abs=1e-12)
    assert 0.0 <= roc.auc <= 1.0
