"""Classification metrics: macro precision/recall/F1, one-vs-rest AUROC."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support, roc_auc_score


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auroc: float | None  # None when no class has both positives and negatives
    confusion: list[list[int]]

    def to_dict(self) -> dict:
        return asdict(self)


def binary_auroc(labels, scores) -> float | None:
    """Rank-statistic AUROC; ties count one half (midranks)."""
    labels = np.asarray(labels)
    if labels.min() == labels.max():
        return None
    return float(roc_auc_score(labels, scores))


def compute_metrics(y_true, y_pred, scores, n_classes: int) -> MetricsReport:
    """``scores`` is (N, n_classes); AUROC is the mean over computable classes."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    labels = list(range(n_classes))
    p, r, f, _ = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, average="macro", zero_division=0
    )
    aucs = [binary_auroc(y_true == c, scores[:, c]) for c in labels]
    aucs = [a for a in aucs if a is not None]
    return MetricsReport(
        accuracy=float(np.mean(y_true == y_pred)),
        precision=float(p),
        recall=float(r),
        f1=float(f),
        auroc=float(np.mean(aucs)) if aucs else None,
        confusion=confusion_matrix(y_true, y_pred, labels=labels).tolist(),
    )
