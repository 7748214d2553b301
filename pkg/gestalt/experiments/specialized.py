"""
A few closely related classes (e.g. genotypes of one syndrome) with a fixed number of held-out
images per class.

Two ways to narrow the model to the subset:

    restrict     train on every class, restrict and renormalize the scores to the subset (default)
    subset_head  train the head on the subset classes only
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

from loguru import logger

from gestalt.config import ExperimentConfig, SpecializedSection
from gestalt.dataio import Dataset, SampleRecord
from gestalt.ensemble import PredictionRecord
from gestalt.errors import EmptyCohortError, InsufficientClassesError, UnknownLabelError
from gestalt.evaluation import EvalReport
from gestalt.experiments.pipeline import ExperimentDriver, PreprocessSummary
from gestalt.experiments.registry import experiment


@experiment("specialized")
class SpecializedExperiment(ExperimentDriver):
    subset_labels: tuple[str, ...] = ()

    @property
    def section(self) -> SpecializedSection:
        assert self.config.specialized is not None  # checked by ExperimentConfig
        return self.config.specialized

    def subset(self, train: Dataset) -> tuple[str, ...]:
        subset = tuple(self.section.classes) or train.classes
        if len(subset) < 2:
            raise InsufficientClassesError(len(subset))
        for label in subset:
            if label not in train.classes:
                raise UnknownLabelError(label, list(train.classes))
        return subset

    def select(self, train: Dataset, test: Dataset) -> tuple[Dataset, Dataset]:
        subset = self.subset(train)
        self.subset_labels = subset
        held_out: list[SampleRecord] = []
        for label in subset:
            candidates = sorted((r for r in test.records if r.label == label), key=lambda r: r.id)
            if not candidates:
                raise EmptyCohortError(label)
            if len(candidates) < self.section.holdout_per_class:
                logger.warning(f"{label}: only {len(candidates)} of {self.section.holdout_per_class} held-out images")
            held_out.extend(candidates[: self.section.holdout_per_class])
        test = Dataset(tuple(held_out), subset, test.root)
        if self.section.truncation == "subset_head":
            return train.with_classes(subset), test
        return train, test

    def scoring_labels(self, head_labels: tuple[str, ...]) -> tuple[str, ...] | None:
        if self.section.truncation == "subset_head":
            return None
        return self.subset_labels

    def finish_report(self, report: dict[str, Any], records: list[PredictionRecord], summary: PreprocessSummary) -> None:
        report["confusion"] = self.confusion(records, summary.eval_labels)
        report["notes"] = {
            "truncation": self.section.truncation,
            "holdout_per_class": self.section.holdout_per_class,
            "head_labels": summary.head_labels,
        }


def run_specialized(config: ExperimentConfig, out: Path, workers: int = 1) -> EvalReport:
    return SpecializedExperiment(config, out, workers).run()
