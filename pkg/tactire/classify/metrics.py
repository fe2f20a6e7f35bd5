"""Accuracy, precision, confusion matrices and precision-recall curves."""
import csv
from dataclasses import dataclass, field
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn import metrics

from tactire.classify.dataset import Dataset, TEST
from tactire.classify.logistic import LRModel
from tactire.data.cycles import ObstacleShape

FLAT = ObstacleShape.FLAT.value
OBSTACLE = "Obstacle"


@dataclass
class EvalReport:
    accuracy: float
    macro_precision: float
    weighted_precision: float
    confusion: np.ndarray  # rows true, columns predicted
    classes: Tuple[str, ...]
    per_class_precision: Dict[str, float]
    undefined_precision_classes: List[str]
    pr_curves: Dict[str, List[Tuple[float, float]]] = field(default_factory=dict)
    per_group_accuracy: Dict[str, float] = field(default_factory=dict)
    flat_vs_obstacle_recall: Optional[Dict[str, float]] = None

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "weighted_precision": self.weighted_precision,
            "classes": list(self.classes),
            "confusion": self.confusion.tolist(),
            "per_class_precision": self.per_class_precision,
            "undefined_precision_classes": self.undefined_precision_classes,
            "pr_curves": {k: [list(p) for p in v] for k, v in self.pr_curves.items()},
            "per_group_accuracy": self.per_group_accuracy,
            "flat_vs_obstacle_recall": self.flat_vs_obstacle_recall,
        }


def group_name(height: Optional[float]) -> str:
    return "flat" if height is None else f"{round(height * 1000)}mm"


def _pr_curves(y_true, proba, proba_classes) -> Dict[str, List[Tuple[float, float]]]:
    curves = {}
    for k, cls in enumerate(proba_classes):
        positives = y_true == cls
        if not positives.any():
            continue
        precision, recall, _ = metrics.precision_recall_curve(positives, proba[:, k])
        curves[cls] = [(float(r), float(p)) for r, p in zip(recall, precision)]
    return curves


def evaluate_predictions(
    y_true: Sequence[str],
    y_pred: Sequence[str],
    classes: Sequence[str],
    proba: Optional[np.ndarray] = None,
    groups: Optional[Sequence[Optional[float]]] = None,
    flat_vs_obstacle: bool = False,
) -> EvalReport:
    """Scores predictions against truth.

    `classes` fixes the confusion-matrix order; true labels missing from it
    are appended. Columns of `proba` follow `classes`. Precision of a class
    that is never predicted is undefined: it counts as 0 and is listed in
    `undefined_precision_classes`.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if len(y_true) == 0:
        raise ValueError("cannot evaluate an empty test split")
    proba_classes = tuple(classes)
    labels = list(proba_classes) + sorted(set(y_true.tolist()) - set(proba_classes))

    confusion = metrics.confusion_matrix(y_true, y_pred, labels=labels)
    precision = metrics.precision_score(
        y_true, y_pred, labels=labels, average=None, zero_division=0
    )
    weighted = metrics.precision_score(
        y_true, y_pred, labels=labels, average="weighted", zero_division=0
    )
    undefined = [c for c, col in zip(labels, confusion.sum(axis=0)) if col == 0]
    report = EvalReport(
        accuracy=float(metrics.accuracy_score(y_true, y_pred)),
        macro_precision=float(np.mean(precision)),
        weighted_precision=float(weighted),
        confusion=confusion,
        classes=tuple(labels),
        per_class_precision={c: float(p) for c, p in zip(labels, precision)},
        undefined_precision_classes=undefined,
    )
    if proba is not None:
        report.pr_curves = _pr_curves(y_true, np.asarray(proba), proba_classes)
    if groups is not None:
        names = np.array([group_name(h) for h in groups])
        report.per_group_accuracy = {
            g: float(np.mean(y_true[names == g] == y_pred[names == g]))
            for g in sorted(set(names.tolist()))
        }
    if flat_vs_obstacle:
        true_bin = np.where(y_true == FLAT, FLAT, OBSTACLE)
        pred_bin = np.where(y_pred == FLAT, FLAT, OBSTACLE)
        recall = metrics.recall_score(
            true_bin, pred_bin, labels=[FLAT, OBSTACLE], average=None, zero_division=0
        )
        report.flat_vs_obstacle_recall = {
            FLAT: float(recall[0]),
            OBSTACLE: float(recall[1]),
        }
    return report


def evaluate(model: LRModel, data: Dataset) -> EvalReport:
    features = data.features(TEST)
    if len(features) == 0:
        raise ValueError("test split is empty")
    proba = model.predict_proba(features)
    y_pred = np.array(model.classes)[np.argmax(proba, axis=1)]
    report = evaluate_predictions(
        data.labels(TEST),
        y_pred,
        model.classes,
        proba=proba,
        groups=data.heights(TEST),
        flat_vs_obstacle=FLAT in data.classes,
    )
    logging.info(
        f"{data.task.value}: accuracy={report.accuracy:.4f} "
        f"macro_precision={report.macro_precision:.4f} on {report.total} windows"
    )
    return report


def write_confusion_csv(report: EvalReport, path: str):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["true\\predicted", *report.classes])
        for cls, row in zip(report.classes, report.confusion):
            writer.writerow([cls, *row.tolist()])


def write_pr_csv(report: EvalReport, path: str):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["class", "recall", "precision"])
        for cls, points in report.pr_curves.items():
            for recall, precision in points:
                writer.writerow([cls, recall, precision])
