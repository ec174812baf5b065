"""Confusion counts, accuracy and ROC/AUC for +/-1 labelled predictions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, MetricError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise MetricError("confusion counts must be nonnegative")

    @classmethod
    def from_labels(cls, y_true, y_pred) -> "ConfusionCounts":
        t = np.asarray(y_true).ravel()
        p = np.asarray(y_pred).ravel()
        if t.shape != p.shape:
            raise DimensionError("label arrays differ in length")
        return cls(
            tp=int(np.sum((t == 1) & (p == 1))),
            fp=int(np.sum((t == -1) & (p == 1))),
            fn=int(np.sum((t == 1) & (p == -1))),
            tn=int(np.sum((t == -1) & (p == -1))),
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def accuracy(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise MetricError("accuracy of an empty prediction set is undefined")
    return (c.tp + c.tn) / c.total


def true_positive_rate(c: ConfusionCounts) -> float:
    if c.tp + c.fn == 0:
        raise MetricError("TPR undefined without positives")
    return c.tp / (c.tp + c.fn)


def false_positive_rate(c: ConfusionCounts) -> float:
    if c.fp + c.tn == 0:
        raise MetricError("FPR undefined without negatives")
    return c.fp / (c.fp + c.tn)


@dataclass(frozen=True, eq=False)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def trapezoid(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


def roc_auc(scores, labels) -> RocCurve:
    """ROC curve over every distinct score threshold, and its trapezoidal area.

    Tied scores form a single threshold step, so the area equals the
    Mann-Whitney statistic with ties counted as one half.
    """
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise DimensionError("scores and labels differ in length")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = int(s.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise MetricError("ROC needs at least one positive and one negative label")
    order = np.argsort(-s, kind="stable")
    s, pos = s[order], pos[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(pos)[ends]
    fp = (ends + 1) - tp
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    return RocCurve(fpr=fpr, tpr=tpr, auc=trapezoid(fpr, tpr))
