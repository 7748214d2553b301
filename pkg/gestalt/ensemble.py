"""
Aggregation of region predictions into ranked gestalt lists, and the prediction record format.

Prediction files are line-delimited JSON. The first line is a header record
(`{"type": "header", ...}` with the label list, seed, config snapshot and code version); every
following line is one sample: `{"type": "prediction", "sample_id", "true_label", "ranked",
"contributors"}` where `ranked` is the full [label, score] list, best first.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel

from gestalt.errors import (
    EmptyEnsembleError,
    InvariantViolation,
    LabelMismatchError,
    LengthMismatchError,
    MissingLogitsError,
    MissingPathError,
    ParseError,
)
from gestalt.nn import softmax

EnsembleMode = Literal["softmax", "logit"]
NORMALIZATION_TOLERANCE = 1e-6


@dataclass(frozen=True)
class GestaltScores:
    """
    Score vector over a label list.

    attributes:
        labels: class labels, unique
        scores: softmax values, same length as labels
        logits: raw logits when the scores come straight from a network, used by logit averaging
        contributors: regions whose predictions went into these scores
    """

    labels: tuple[str, ...]
    scores: np.ndarray = field(repr=False)
    logits: np.ndarray | None = field(default=None, repr=False)
    contributors: tuple[str, ...] = ()

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        object.__setattr__(self, "scores", scores)
        if scores.shape != (len(self.labels),):
            raise LengthMismatchError("scores vs labels", scores.shape[0] if scores.ndim else 1, len(self.labels))
        if len(set(self.labels)) != len(self.labels):
            raise InvariantViolation("unique labels", f"{list(self.labels)}")
        if np.any(scores < 0) or np.any(scores > 1) or abs(float(scores.sum()) - 1) > NORMALIZATION_TOLERANCE:
            raise InvariantViolation("softmax normalization", f"sum {float(scores.sum())!r}")

    @classmethod
    def from_logits(cls, labels: Sequence[str], logits: np.ndarray, region: str | None = None) -> GestaltScores:
        logits64 = np.asarray(logits, dtype=np.float64)
        return cls(tuple(labels), softmax(logits64), logits64, (region,) if region else ())

    def restricted(self, labels: Sequence[str]) -> GestaltScores:
        """Scores over a label subset, renormalized to sum to 1"""
        index = [self.labels.index(label) for label in labels]
        subset = self.scores[index]
        total = subset.sum()
        renormalized = subset / total if total > 0 else np.full(len(index), 1 / len(index))
        logits = self.logits[index] if self.logits is not None else None
        return GestaltScores(tuple(labels), renormalized, logits, self.contributors)


@dataclass(frozen=True)
class RankedList:
    """(label, score) pairs in non-increasing score order, ties in label-list order"""

    entries: tuple[tuple[str, float], ...]

    @property
    def labels(self) -> list[str]:
        return [label for label, _ in self.entries]

    def top(self, k: int) -> list[str]:
        return self.labels[:k]

    def position(self, label: str) -> int:
        """0-based rank of a label"""
        return self.labels.index(label)

    def score(self, label: str) -> float:
        return dict(self.entries)[label]

    def to_scores(self, labels: Sequence[str]) -> np.ndarray:
        lookup = dict(self.entries)
        return np.array([lookup[label] for label in labels])


def aggregate(region_scores: Sequence[GestaltScores], mode: EnsembleMode = "softmax") -> GestaltScores:
    """
    Element-wise mean of the available region vectors.

    softmax mode averages the score vectors. logit mode averages the raw logits and applies
    softmax to the mean. The result records every contributing region.
    """
    if not region_scores:
        raise EmptyEnsembleError
    labels = region_scores[0].labels
    for scores in region_scores[1:]:
        if scores.labels != labels:
            raise LabelMismatchError(labels, scores.labels)
    contributors = tuple(dict.fromkeys(region for scores in region_scores for region in scores.contributors))
    if mode == "logit":
        logits: list[np.ndarray] = []
        for scores in region_scores:
            if scores.logits is None:
                raise MissingLogitsError(",".join(scores.contributors) or "region")
            logits.append(scores.logits)
        mean_logits = np.mean(np.stack(logits), axis=0)
        return GestaltScores(labels, softmax(mean_logits), mean_logits, contributors)
    mean = np.mean(np.stack([scores.scores for scores in region_scores]), axis=0)
    return GestaltScores(labels, mean, None, contributors)


def rank(scores: GestaltScores) -> RankedList:
    """Stable descending sort; equal scores keep ascending label-list order"""
    order = np.lexsort((np.arange(len(scores.labels)), -scores.scores))
    return RankedList(tuple((scores.labels[i], float(scores.scores[i])) for i in order))


class PredictionRecord(BaseModel):
    type: Literal["prediction"] = "prediction"
    sample_id: str
    true_label: str | None = None
    ranked: list[tuple[str, float]]
    contributors: list[str] = []

    @property
    def ranked_list(self) -> RankedList:
        return RankedList(tuple(self.ranked))


def prediction_record(sample_id: str, scores: GestaltScores, true_label: str | None = None) -> PredictionRecord:
    return PredictionRecord(
        sample_id=sample_id,
        true_label=true_label,
        ranked=list(rank(scores).entries),
        contributors=list(scores.contributors),
    )


def write_predictions(path: Path, records: Iterable[PredictionRecord], header: dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        f.write(json.dumps({"type": "header", **header}, sort_keys=True) + "\n")
        f.writelines(json.dumps(record.model_dump(), sort_keys=True) + "\n" for record in records)


def read_predictions(path: Path) -> tuple[dict[str, Any], list[PredictionRecord]]:
    if not path.exists():
        raise MissingPathError(path, "predictions file")
    header: dict[str, Any] = {}
    records: list[PredictionRecord] = []
    with path.open(encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                document = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(path, line_number, str(e)) from None
            if document.get("type") == "header":
                header = document
            else:
                records.append(PredictionRecord.model_validate(document))
    return header, records
