"""Evaluation metrics.

Five levels: Dice for segmentation, precision/recall/F1 for per-station
involvement, RMSE (and its normalized form, in score levels) for the
total score, precision/recall/F1 per indication class, and balanced
accuracy for the frame relevance discriminator; plus mean/std summaries
across folds or models.

Undefined values are explicit: operations return None (never a silent
0) and summaries report how many run values were excluded. Standard
deviations are population standard deviations, fixed for determinism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import Indication, ScoringConstants
from .errors import (
    AllUndefinedError,
    DimensionMismatchError,
    EmptyCohortError,
    LengthMismatchError,
    MissingGroundTruthError,
    UndefinedClassError,
)

__all__ = [
    "ConfusionCounts",
    "MetricSummary",
    "dice",
    "precision_recall_f1",
    "station_confusions",
    "fs_rmse",
    "normalized_rmse",
    "balanced_accuracy",
    "its_confusions",
    "summarize_runs",
    "macro_average",
]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            tn=self.tn + other.tn,
            fn=self.fn + other.fn,
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricSummary:
    """Mean and population standard deviation over fold/model values;
    excluded counts the undefined run values left out."""

    mean: float
    std: float
    n: int
    excluded: int = 0

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "n": self.n, "excluded": self.excluded}


def dice(gt: np.ndarray, pred: np.ndarray) -> float | None:
    """Dice similarity 2|A.B| / (|A| + |B|) between two binary masks.

    None (undefined) when both masks are empty; such frames are excluded
    from averages rather than inflating them.
    """
    gt = np.asarray(gt, dtype=bool)
    pred = np.asarray(pred, dtype=bool)
    if gt.shape != pred.shape:
        raise DimensionMismatchError(f"mask shapes differ: {gt.shape} vs {pred.shape}")
    denom = int(gt.sum()) + int(pred.sum())
    if denom == 0:
        return None
    inter = int(np.logical_and(gt, pred).sum())
    return 2.0 * inter / denom


def precision_recall_f1(
    c: ConfusionCounts,
) -> tuple[float | None, float | None, float | None]:
    """Precision, recall and F1 from confusion counts.

    Each value is None when its denominator is zero; F1 is None whenever
    precision or recall is, and 0.0 when both are defined but zero.
    """
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) > 0 else None
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) > 0 else None
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return precision, recall, f1


def station_confusions(
    predictions: Sequence[Sequence[bool]],
    ground_truth: Sequence[Sequence[bool] | None],
) -> list[ConfusionCounts]:
    """Per-station confusion counts over videos; the positive class is
    "station involved"."""
    if len(predictions) != len(ground_truth):
        raise LengthMismatchError(
            f"{len(predictions)} predictions vs {len(ground_truth)} ground truths"
        )
    counts = [[0, 0, 0, 0] for _ in range(6)]  # tp, fp, tn, fn
    for i, (pred, gt) in enumerate(zip(predictions, ground_truth)):
        if gt is None:
            raise MissingGroundTruthError(f"video index {i} has no ground truth")
        if len(pred) != 6 or len(gt) != 6:
            raise LengthMismatchError("station vectors must have 6 entries")
        for s in range(6):
            p, g = bool(pred[s]), bool(gt[s])
            if p and g:
                counts[s][0] += 1
            elif p and not g:
                counts[s][1] += 1
            elif not p and not g:
                counts[s][2] += 1
            else:
                counts[s][3] += 1
    return [ConfusionCounts(tp=c[0], fp=c[1], tn=c[2], fn=c[3]) for c in counts]


def fs_rmse(pred_fs: Sequence[float], gt_fs: Sequence[float]) -> float:
    """Root mean square error between predicted and reference scores."""
    if len(pred_fs) != len(gt_fs):
        raise LengthMismatchError(f"{len(pred_fs)} predictions vs {len(gt_fs)} references")
    if not pred_fs:
        raise EmptyCohortError("RMSE over an empty cohort is undefined")
    total = 0.0
    for p, g in zip(pred_fs, gt_fs):
        total += (float(p) - float(g)) ** 2
    return math.sqrt(total / len(pred_fs))


def normalized_rmse(rmse: float, constants: ScoringConstants | None = None) -> float:
    """RMSE expressed in score levels: RMSE divided by the score step."""
    if rmse < 0:
        raise ValueError("rmse must be non-negative")
    step = (constants or ScoringConstants()).fs_step
    return rmse / step


def balanced_accuracy(c: ConfusionCounts) -> float:
    """Mean of sensitivity and specificity; robust to class imbalance.

    Requires both classes to be present."""
    if c.tp + c.fn == 0:
        raise UndefinedClassError("no positive units; sensitivity undefined")
    if c.tn + c.fp == 0:
        raise UndefinedClassError("no negative units; specificity undefined")
    sensitivity = c.tp / (c.tp + c.fn)
    specificity = c.tn / (c.tn + c.fp)
    return (sensitivity + specificity) / 2.0


def its_confusions(
    pred_its: Sequence[Indication],
    gt_its: Sequence[Indication],
) -> dict[Indication, ConfusionCounts]:
    """One confusion per indication class, each treating that class as
    positive (two report rows: score below the cutoff, and at/above)."""
    if len(pred_its) != len(gt_its):
        raise LengthMismatchError(f"{len(pred_its)} predictions vs {len(gt_its)} references")
    result: dict[Indication, ConfusionCounts] = {}
    for cls in Indication:
        tp = fp = tn = fn = 0
        for p, g in zip(pred_its, gt_its):
            if p is cls and g is cls:
                tp += 1
            elif p is cls:
                fp += 1
            elif g is cls:
                fn += 1
            else:
                tn += 1
        result[cls] = ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)
    return result


def summarize_runs(values: Iterable[float | None]) -> MetricSummary:
    """Arithmetic mean and population standard deviation over run values.

    Undefined (None) values are excluded and counted; summation order is
    the input order, fixed for bitwise reproducibility.
    """
    values = list(values)
    defined = [float(v) for v in values if v is not None]
    excluded = len(values) - len(defined)
    if not defined:
        raise AllUndefinedError("all run values are undefined")
    n = len(defined)
    mean = sum(defined) / n
    variance = sum((v - mean) ** 2 for v in defined) / n
    return MetricSummary(mean=mean, std=math.sqrt(variance), n=n, excluded=excluded)


def macro_average(values: Iterable[float | None]) -> float | None:
    """Unweighted mean over the defined values; None if none are."""
    defined = [float(v) for v in values if v is not None]
    if not defined:
        return None
    return sum(defined) / len(defined)
