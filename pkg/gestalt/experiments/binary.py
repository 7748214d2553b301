"""Two cohorts, e.g. one syndrome against everything it is usually confused with."""

from __future__ import annotations

from pathlib import Path
from typing import Any

from gestalt.config import CohortsSection, ExperimentConfig
from gestalt.dataio import Dataset
from gestalt.ensemble import PredictionRecord
from gestalt.errors import EmptyCohortError, UnknownLabelError
from gestalt.evaluation import EvalReport, binary_metrics
from gestalt.experiments.pipeline import ExperimentDriver, PreprocessSummary
from gestalt.experiments.registry import experiment


@experiment("binary")
class BinaryExperiment(ExperimentDriver):
    @property
    def cohorts(self) -> CohortsSection:
        assert self.config.cohorts is not None  # checked by ExperimentConfig
        return self.config.cohorts

    def relabel(self, dataset: Dataset) -> Dataset:
        """Maps source labels onto the two cohort names and drops samples in neither cohort"""
        cohorts = self.cohorts
        mapping = {label: cohorts.positive_name for label in cohorts.positive}
        mapping.update({label: cohorts.negative_name for label in cohorts.negative})
        records = [
            record.model_copy(update={"label": mapping[record.label]})
            for record in dataset.records
            if record.label in mapping
        ]
        return Dataset(tuple(records), (cohorts.positive_name, cohorts.negative_name), dataset.root)

    def select(self, train: Dataset, test: Dataset) -> tuple[Dataset, Dataset]:
        cohorts = self.cohorts
        for label in [*cohorts.positive, *cohorts.negative]:
            if label not in train.classes:
                raise UnknownLabelError(label, list(train.classes))
        train, test = self.relabel(train), self.relabel(test)
        for dataset in (train, test):
            counts = dataset.class_counts()
            for name in (cohorts.positive_name, cohorts.negative_name):
                if not counts[name]:
                    raise EmptyCohortError(name)
        return train, test

    def finish_report(self, report: dict[str, Any], records: list[PredictionRecord], summary: PreprocessSummary) -> None:
        positive = self.cohorts.positive_name
        predicted = [record.ranked[0][0] == positive for record in records]
        actual = [record.true_label == positive for record in records]
        report["binary"] = binary_metrics(predicted, actual)
        report["confusion"] = self.confusion(records, summary.eval_labels)
        report["notes"] = {"positive": self.cohorts.positive, "negative": self.cohorts.negative}


def run_binary(config: ExperimentConfig, out: Path, workers: int = 1) -> EvalReport:
    return BinaryExperiment(config, out, workers).run()
