"""Accuracy metrics used as the permutation test statistic."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import LengthMismatch, UndefinedMetric


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


class MetricKind(str, Enum):
    BACC = "bacc"
    F1 = "f1"
    ACCURACY = "accuracy"


def confusion(y, y_pred) -> ConfusionMatrix:
    y = np.asarray(y)
    y_pred = np.asarray(y_pred)
    if y.shape != y_pred.shape:
        raise LengthMismatch(f"labels have shape {y.shape}, predictions {y_pred.shape}")
    if y.size == 0:
        raise LengthMismatch("cannot score zero subjects")
    pos = y == 1
    pred_pos = y_pred == 1
    tp = int(np.sum(pos & pred_pos))
    fn = int(np.sum(pos & ~pred_pos))
    fp = int(np.sum(~pos & pred_pos))
    tn = int(np.sum(~pos & ~pred_pos))
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def bacc(cm: ConfusionMatrix) -> float:
    """(sensitivity + specificity) / 2; needs both classes present in y."""
    if cm.tp + cm.fn == 0 or cm.tn + cm.fp == 0:
        raise UndefinedMetric("balanced accuracy needs at least one subject of each class")
    sensitivity = cm.tp / (cm.tp + cm.fn)
    specificity = cm.tn / (cm.tn + cm.fp)
    return (sensitivity + specificity) / 2.0


def f1(cm: ConfusionMatrix) -> float:
    """2tp / (2tp + fp + fn); 0 by convention when no positives anywhere."""
    denom = 2 * cm.tp + cm.fp + cm.fn
    if denom == 0:
        return 0.0
    return 2 * cm.tp / denom


def accuracy(cm: ConfusionMatrix) -> float:
    return (cm.tp + cm.tn) / cm.total


_DISPATCH = {
    MetricKind.BACC: bacc,
    MetricKind.F1: f1,
    MetricKind.ACCURACY: accuracy,
}


def evaluate(kind: MetricKind, y, y_pred) -> float:
    return _DISPATCH[MetricKind(kind)](confusion(y, y_pred))


def evaluate_cm(kind: MetricKind, cm: ConfusionMatrix) -> float:
    return _DISPATCH[MetricKind(kind)](cm)
