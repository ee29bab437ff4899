"""Accuracy and per-class precision/recall/F1 from a confusion matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Metrics:
    accuracy: float
    precision_rumor: float
    recall_rumor: float
    f1_rumor: float
    precision_nonrumor: float
    recall_nonrumor: float
    f1_nonrumor: float
    confusion: tuple  # (tp, fp, fn, tn) with rumor (label 1) as positive


def _ratio(num, den):
    return float(num) / den if den else 0.0


def _f1(p, r):
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def confusion(labels, preds) -> tuple:
    labels = np.asarray(labels)
    preds = np.asarray(preds)
    if labels.shape != preds.shape:
        raise ValueError(f"{labels.size} labels but {preds.size} predictions")
    tp = int(np.sum((preds == 1) & (labels == 1)))
    fp = int(np.sum((preds == 1) & (labels == 0)))
    fn = int(np.sum((preds == 0) & (labels == 1)))
    tn = int(np.sum((preds == 0) & (labels == 0)))
    return tp, fp, fn, tn


def compute_metrics(labels, preds) -> Metrics:
    tp, fp, fn, tn = confusion(labels, preds)
    total = tp + fp + fn + tn
    p1, r1 = _ratio(tp, tp + fp), _ratio(tp, tp + fn)
    p0, r0 = _ratio(tn, tn + fn), _ratio(tn, tn + fp)
    return Metrics(_ratio(tp + tn, total), p1, r1, _f1(p1, r1), p0, r0, _f1(p0, r0),
                   (tp, fp, fn, tn))
