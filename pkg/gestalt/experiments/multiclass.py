"""Every class at once: per-region table, aggregated top-K with permutation tests, confusion matrix."""

from __future__ import annotations

from pathlib import Path
from typing import Any

from loguru import logger

from gestalt.config import ExperimentConfig
from gestalt.dataio import Dataset
from gestalt.ensemble import PredictionRecord
from gestalt.evaluation import EvalReport, format_region_table
from gestalt.experiments.pipeline import ExperimentDriver, PreprocessSummary
from gestalt.experiments.registry import experiment


@experiment("multiclass")
class MulticlassExperiment(ExperimentDriver):
    min_classes = 3

    def select(self, train: Dataset, test: Dataset) -> tuple[Dataset, Dataset]:
        # test labels the head has never seen cannot be scored
        unseen = [record.id for record in test.records if record.label not in train.classes]
        if unseen:
            logger.warning(f"dropping {len(unseen)} test samples with labels outside the training classes")
        return train, Dataset(
            tuple(record for record in test.records if record.label in train.classes), train.classes, test.root
        )

    def finish_report(self, report: dict[str, Any], records: list[PredictionRecord], summary: PreprocessSummary) -> None:
        rows = self.region_rows(records, len(summary.eval_labels))
        report["regions"] = rows
        report["confusion"] = self.confusion(records, summary.eval_labels)
        k = 5 if 5 in rows[-1].accuracies else max(rows[-1].accuracies)
        logger.info("per-region accuracy\n" + format_region_table(rows, k))


def run_multiclass(config: ExperimentConfig, out: Path, workers: int = 1) -> EvalReport:
    return MulticlassExperiment(config, out, workers).run()
