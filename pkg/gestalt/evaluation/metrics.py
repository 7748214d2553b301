from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel
from sklearn import metrics as skmetrics

from gestalt.ensemble import RankedList
from gestalt.errors import EmptyCohortError, InvariantViolation, LengthMismatchError


def topk_hits(ranked_lists: Sequence[RankedList], labels: Sequence[str], k: int) -> np.ndarray:
    """Boolean per sample: is the true label among the first k entries"""
    if len(ranked_lists) != len(labels):
        raise LengthMismatchError("ranked lists vs labels", len(ranked_lists), len(labels))
    if k < 1:
        msg = f"k must be >= 1, got {k}"
        raise ValueError(msg)
    return np.array([label in ranked.top(k) for ranked, label in zip(ranked_lists, labels, strict=True)], dtype=bool)


def topk_accuracy(ranked_lists: Sequence[RankedList], labels: Sequence[str], k: int) -> float:
    hits = topk_hits(ranked_lists, labels, k)
    return float(hits.mean()) if hits.size else 0.0


def topk_accuracies(ranked_lists: Sequence[RankedList], labels: Sequence[str], ks: Sequence[int]) -> dict[int, float]:
    """Accuracy for every k, checking that a hit at k stays a hit at every larger k."""
    ordered = sorted(set(ks))
    hits = [topk_hits(ranked_lists, labels, k) for k in ordered]
    for smaller, larger, k in zip(hits, hits[1:], ordered[1:], strict=False):
        if np.any(smaller & ~larger):
            raise InvariantViolation("top-K monotone membership", f"a hit is lost going to k={k}")
    return {k: float(h.mean()) if h.size else 0.0 for k, h in zip(ordered, hits, strict=True)}


def confusion_matrix(predictions: Sequence[str], labels: Sequence[str], classes: Sequence[str]) -> np.ndarray:
    """counts[true][predicted] over `classes`; every row sums to that class's support."""
    if len(predictions) != len(labels):
        raise LengthMismatchError("predictions vs labels", len(predictions), len(labels))
    if not labels:
        return np.zeros((len(classes), len(classes)), dtype=np.int64)
    matrix = skmetrics.confusion_matrix(list(labels), list(predictions), labels=list(classes)).astype(np.int64)
    support = np.array([sum(1 for label in labels if label == c) for c in classes])
    if not np.array_equal(matrix.sum(axis=1), support):
        raise InvariantViolation("confusion row sums equal class support", f"{matrix.sum(axis=1)} vs {support}")
    return matrix


class BinaryMetrics(BaseModel):
    """Undefined ratios (empty denominators) are None, never 0."""

    accuracy: float
    sensitivity: float | None
    specificity: float | None
    true_positive: int
    false_negative: int
    true_negative: int
    false_positive: int

    @classmethod
    def from_counts(cls, tp: int, fn: int, tn: int, fp: int) -> BinaryMetrics:
        total = tp + fn + tn + fp
        return cls(
            accuracy=(tp + tn) / total if total else 0.0,
            sensitivity=tp / (tp + fn) if tp + fn else None,
            specificity=tn / (tn + fp) if tn + fp else None,
            true_positive=tp,
            false_negative=fn,
            true_negative=tn,
            false_positive=fp,
        )


def binary_metrics(
    predicted_positive: Sequence[bool],
    actual_positive: Sequence[bool],
    require_both_cohorts: bool = True,
) -> BinaryMetrics:
    """
    Accuracy, sensitivity and specificity of positive/negative calls.

    With require_both_cohorts a missing cohort raises EmptyCohortError; otherwise the ratio that
    needs it is reported as None.
    """
    if len(predicted_positive) != len(actual_positive):
        raise LengthMismatchError("predictions vs cohorts", len(predicted_positive), len(actual_positive))
    predicted = np.asarray(predicted_positive, dtype=bool)
    actual = np.asarray(actual_positive, dtype=bool)
    if require_both_cohorts:
        if not actual.any():
            raise EmptyCohortError("positive")
        if actual.all():
            raise EmptyCohortError("negative")
    return BinaryMetrics.from_counts(
        tp=int(np.sum(predicted & actual)),
        fn=int(np.sum(~predicted & actual)),
        tn=int(np.sum(~predicted & ~actual)),
        fp=int(np.sum(predicted & ~actual)),
    )


def error_rate_reduction(reference_accuracy: float, model_accuracy: float) -> float:
    """(err_ref - err_model) / err_ref, the share of the reference's errors the model avoids"""
    reference_error = 1 - reference_accuracy
    if reference_error <= 0:
        msg = "reference accuracy must be below 1"
        raise ValueError(msg)
    return (reference_error - (1 - model_accuracy)) / reference_error
