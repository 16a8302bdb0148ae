"""Dataset splitting and evaluation: accuracy, loss, confusion counts,
ROC curve, AUC (trapezoidal, cross-checked by the pairwise statistic)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (LengthMismatch, SingleClassAuc, TooFewRecords)
from .nn import PROB_FLOOR

THRESHOLD = 0.5   # score >= threshold classifies as affected


@dataclass
class EvalReport:
    accuracy: float
    mean_loss: float
    tp: int
    fp: int
    tn: int
    fn: int
    roc: list          # (fpr, tpr) points, (0,0) .. (1,1)
    auc: float

    @property
    def error_rate(self) -> float:
        return 1.0 - self.accuracy


def split(items, seed: int, train_frac: float, stratified: bool = False,
          label_of=None):
    """Seeded shuffle then split. With stratified=True the label ratio is
    preserved within one example per class; label_of extracts the label
    (defaults to item.label, falling back to item[1])."""
    if not 0 < train_frac < 1:
        raise ValueError("train_frac must lie in (0, 1)")
    items = list(items)
    if len(items) < 2:
        raise TooFewRecords(f"cannot split {len(items)} record(s)")
    rng = np.random.default_rng(seed)

    if label_of is None:
        def label_of(item):
            return item.label if hasattr(item, "label") else item[1]

    if not stratified:
        order = rng.permutation(len(items))
        cut = int(round(len(items) * train_frac))
        train = [items[i] for i in order[:cut]]
        test = [items[i] for i in order[cut:]]
        return train, test

    by_label = {}
    for i in range(len(items)):
        by_label.setdefault(label_of(items[i]), []).append(i)
    train_idx, test_idx = [], []
    for label in sorted(by_label):
        idx = np.array(by_label[label])
        idx = idx[rng.permutation(len(idx))]
        cut = int(round(len(idx) * train_frac))
        train_idx.extend(idx[:cut])
        test_idx.extend(idx[cut:])
    # keep the overall order seeded, not grouped by label
    train_idx = [train_idx[i] for i in rng.permutation(len(train_idx))]
    test_idx = [test_idx[i] for i in rng.permutation(len(test_idx))]
    return [items[i] for i in train_idx], [items[i] for i in test_idx]


def _check(scores, labels):
    scores = np.asarray(scores, dtype=float)
    y = np.array([1 if lab == "affected" else 0 for lab in labels])
    if len(scores) != len(labels):
        raise LengthMismatch(f"{len(scores)} scores vs {len(labels)} labels")
    if len(scores) == 0:
        raise LengthMismatch("empty score list")
    return scores, y


def roc_points(scores, labels):
    """ROC by sweeping every distinct score as a threshold, highest first.
    Starts at (0, 0), ends at (1, 1)."""
    scores, y = _check(scores, labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassAuc("ROC/AUC undefined with a single class")
    order = np.argsort(-scores, kind="stable")
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(order):
        threshold = scores[order[i]]
        while i < len(order) and scores[order[i]] == threshold:
            if y[order[i]] == 1:
                tp += 1
            else:
                fp += 1
            i += 1
        points.append((fp / n_neg, tp / n_pos))
    return points


def auc_trapezoid(points) -> float:
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def auc_pairwise(scores, labels) -> float:
    """Mann-Whitney statistic: fraction of (affected, unaffected) pairs the
    affected example outscores, ties counting one half. O(n^2) by design;
    serves as the independent oracle for the trapezoidal AUC."""
    scores, y = _check(scores, labels)
    pos = scores[y == 1]
    neg = scores[y == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise SingleClassAuc("AUC undefined with a single class")
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def evaluate(scores, labels) -> EvalReport:
    """Full report for p_affected scores against true labels.

    Classification threshold 0.5; a score exactly at the threshold counts
    as affected."""
    scores, y = _check(scores, labels)
    predicted = (scores >= THRESHOLD).astype(int)
    tp = int(np.sum((predicted == 1) & (y == 1)))
    fp = int(np.sum((predicted == 1) & (y == 0)))
    tn = int(np.sum((predicted == 0) & (y == 0)))
    fn = int(np.sum((predicted == 0) & (y == 1)))
    accuracy = (tp + tn) / len(y)
    p_true = np.where(y == 1, scores, 1.0 - scores)
    mean_loss = float(np.mean(-np.log(np.maximum(p_true, PROB_FLOOR))))
    points = roc_points(scores, labels)
    return EvalReport(accuracy=accuracy, mean_loss=mean_loss,
                      tp=tp, fp=fp, tn=tn, fn=fn,
                      roc=points, auc=auc_trapezoid(points))
