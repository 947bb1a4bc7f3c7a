"""Confusion matrices and precision/recall/F1/accuracy reports.

Ratios are computed with exact fractions and rounded to float once, so the
support-weighted recall equals accuracy bit-for-bit.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .data import CLASS_NAMES

logger = logging.getLogger(__name__)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, cols = predicted class
    class_names: tuple[str, ...] = CLASS_NAMES

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        c = len(self.class_names)
        if self.counts.shape != (c, c):
            raise ValueError(f"confusion matrix must be {c}x{c}, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts, self.class_names)

    def to_csv(self, path: Path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["true\\pred", *self.class_names])
            for name, row in zip(self.class_names, self.counts):
                w.writerow([name, *row.tolist()])


def confusion(predictions, truths, num_classes: int = len(CLASS_NAMES)) -> ConfusionMatrix:
    predictions = np.asarray(predictions, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if predictions.shape != truths.shape:
        raise ValueError(f"length mismatch: {predictions.shape} predictions vs {truths.shape} truths")
    for arr in (predictions, truths):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise ValueError(f"labels must lie in [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (truths, predictions), 1)
    names = CLASS_NAMES if num_classes == len(CLASS_NAMES) else tuple(str(i) for i in range(num_classes))
    return ConfusionMatrix(counts, names)


@dataclass
class MetricsReport:
    class_names: tuple[str, ...]
    precision: list[float]
    recall: list[float]
    f1: list[float]
    support: list[int]
    macro: dict[str, float]
    weighted: dict[str, float]
    accuracy: float
    n: int

    def to_dict(self) -> dict:
        return {
            "per_class": {
                name: {"precision": p, "recall": r, "f1": f, "support": s}
                for name, p, r, f, s in zip(self.class_names, self.precision, self.recall, self.f1, self.support)
            },
            "macro": dict(self.macro),
            "weighted": dict(self.weighted),
            "accuracy": self.accuracy,
            "n": self.n,
        }

    def table_row(self, average: str = "macro") -> dict[str, float]:
        avg = self.macro if average == "macro" else self.weighted
        return {"precision": avg["precision"], "recall": avg["recall"], "f1_score": avg["f1"], "accuracy": self.accuracy}


def _ratio(num: int, den: int) -> Fraction:
    return Fraction(num, den) if den else Fraction(0)


def compute_metrics(cm: ConfusionMatrix) -> MetricsReport:
    counts = cm.counts
    total = cm.total
    if total == 0:
        raise ValueError("cannot compute metrics of an empty confusion matrix")
    c = counts.shape[0]
    tp = [int(counts[i, i]) for i in range(c)]
    support = [int(counts[i, :].sum()) for i in range(c)]
    predicted = [int(counts[:, i].sum()) for i in range(c)]
    prec = [_ratio(tp[i], predicted[i]) for i in range(c)]
    rec = [_ratio(tp[i], support[i]) for i in range(c)]
    f1 = [2 * p * r / (p + r) if p + r else Fraction(0) for p, r in zip(prec, rec)]
    undefined = [cm.class_names[i] for i in range(c) if predicted[i] == 0 or support[i] == 0]
    if undefined:
        logger.warning("zero-denominator precision/recall set to 0 for classes %s", undefined)

    def macro(vals):
        return float(sum(vals, Fraction(0)) / c)

    def weighted(vals):
        return float(sum((v * s for v, s in zip(vals, support)), Fraction(0)) / total)

    return MetricsReport(
        class_names=cm.class_names,
        precision=[float(x) for x in prec],
        recall=[float(x) for x in rec],
        f1=[float(x) for x in f1],
        support=support,
        macro={"precision": macro(prec), "recall": macro(rec), "f1": macro(f1)},
        weighted={"precision": weighted(prec), "recall": weighted(rec), "f1": weighted(f1)},
        accuracy=float(Fraction(sum(tp), total)),
        n=total,
    )


TABLE_FIELDS = ("model", "setup", "precision", "recall", "f1_score", "accuracy")


def write_table(path: Path, rows: list[dict]):
    """Write model/setup/P/R/F1/accuracy rows, three decimals per metric."""
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TABLE_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{r[k]:.3f}" if isinstance(r[k], float) else r[k]) for k in TABLE_FIELDS})
