"""
The stages every experiment shares, each reading and writing a run directory:

    preprocess  data -> exclusions -> template -> crops/<split>_<region>.data
    pretrain    crops/pretrain_* (+ pretrain_val_*) -> checkpoints/pretrained/<region>.ckpt
    finetune    crops/train_* + pretrained -> checkpoints/finetuned/<region>.ckpt
    predict     crops/test_* + finetuned -> predictions.jsonl, predictions/<region>.jsonl
    evaluate    predictions -> report.json, plots/

Experiment kinds change which samples and labels go into the crops and what the report holds.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Any, ClassVar

import numpy as np
from loguru import logger
from pydantic import BaseModel

import gestalt
from gestalt.config import ExperimentConfig, config_snapshot, write_config_snapshot
from gestalt.dataio import (
    AugmentationPolicy,
    CohortStatistics,
    Dataset,
    SampleLoader,
    cohort_statistics,
    deduplicate_and_exclude,
    exclude_unusable,
    generate_identity_data,
    generate_syndrome_data,
    load_manifest,
    split_dataset,
)
from gestalt.ensemble import GestaltScores, PredictionRecord, aggregate, prediction_record, read_predictions, write_predictions
from gestalt.errors import EmptyCohortError, InsufficientClassesError, MissingPathError
from gestalt.evaluation import (
    AGGREGATED_ROW,
    ConfusionReport,
    EvalReport,
    ExclusionRecord,
    RegionRow,
    TopKResult,
    composite_photo,
    confusion_matrix,
    permutation_test,
    save_composite,
    topk_accuracies,
    write_report,
)
from gestalt.evaluation.plots import plot_confusion, plot_regions, plot_topk
from gestalt.gestaltnet import (
    RegionData,
    dump_activations,
    load_region_data,
    load_region_model,
    predict_batch,
    save_region_data,
)
from gestalt.jobs import Job
from gestalt.jobs.pooler import run_jobs
from gestalt.jobs.runners.region import RegionTrainingJob
from gestalt.preproc import (
    LandmarkSet,
    RegionCrop,
    RegionTag,
    build_canonical_template,
    preprocess_sample,
    save_template,
)

REGION_ORDER = tuple(RegionTag)


def region_seed(seed: int, tag: RegionTag) -> int:
    """Distinct, reproducible seed per (experiment seed, region)"""
    return seed * len(REGION_ORDER) + REGION_ORDER.index(tag)


@dataclass(frozen=True)
class RunLayout:
    """Paths inside one run directory"""

    root: Path

    @property
    def config(self) -> Path:
        return self.root / "config.toml"

    @property
    def data(self) -> Path:
        return self.root / "data"

    @property
    def template(self) -> Path:
        return self.root / "template.tsv"

    @property
    def summary(self) -> Path:
        return self.root / "preprocess.json"

    @property
    def predictions(self) -> Path:
        return self.root / "predictions.jsonl"

    @property
    def report(self) -> Path:
        return self.root / "report.json"

    @property
    def plots(self) -> Path:
        return self.root / "plots"

    @property
    def composites(self) -> Path:
        return self.root / "composites"

    @property
    def activations(self) -> Path:
        return self.root / "activations"

    def crops(self, split: str, tag: RegionTag) -> Path:
        return self.root / "crops" / f"{split}_{tag}.data"

    def checkpoint(self, phase: str, tag: RegionTag) -> Path:
        return self.root / "checkpoints" / phase / f"{tag}.ckpt"

    def metrics(self, stage: str, tag: RegionTag) -> Path:
        return self.root / "metrics" / f"{stage}_{tag}.jsonl"

    def region_predictions(self, tag: RegionTag) -> Path:
        return self.root / "predictions" / f"{tag}.jsonl"


class PreprocessSummary(BaseModel):
    """What the preprocess stage decided, read back by the later stages"""

    kind: str
    head_labels: list[str]
    eval_labels: list[str]
    test_labels: dict[str, str]
    regions: dict[str, dict[str, int]]
    exclusions: list[ExclusionRecord] = []
    cohorts: dict[str, CohortStatistics] = {}
    composites: list[str] = []

    def write(self, path: Path) -> None:
        path.write_text(self.model_dump_json(indent=2) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path: Path) -> PreprocessSummary:
        if not path.exists():
            raise MissingPathError(path, "preprocess summary (run the preprocess stage first)")
        return cls.model_validate_json(path.read_text(encoding="utf-8"))


class ExperimentDriver(ABC):
    """
    Runs one experiment kind over a run directory. Subclasses pick samples and labels in
    `select` and fill in the kind-specific parts of the report in `finish_report`.
    """

    kind: ClassVar[str]
    min_classes: ClassVar[int] = 2

    def __init__(self, config: ExperimentConfig, out: Path, workers: int = 1):
        self.config = config
        self.layout = RunLayout(out)
        self.workers = config.experiment.workers or workers
        self.snapshot = config_snapshot(config)
        self.regions: list[RegionTag] = list(config.experiment.regions)

    # kind-specific hooks
    @abstractmethod
    def select(self, train: Dataset, test: Dataset) -> tuple[Dataset, Dataset]:
        """Returns the (train, test) datasets the models are trained and scored on"""

    def scoring_labels(self, head_labels: tuple[str, ...]) -> tuple[str, ...] | None:
        """Label subset predictions are restricted to, or None to score over the whole head"""
        return None

    @abstractmethod
    def finish_report(self, report: dict[str, Any], records: list[PredictionRecord], summary: PreprocessSummary) -> None:
        """Adds kind-specific fields to the report document before validation"""

    # stages
    def run(self) -> EvalReport:
        logger.info(f"running {self.kind} experiment {self.config.experiment.name!r} into {self.layout.root}")
        self.preprocess()
        self.pretrain()
        self.finetune()
        self.predict()
        return self.evaluate()

    def load_data(self) -> tuple[Dataset, Dataset, Dataset | None]:
        data = self.config.data
        if data.synthetic is not None:
            datasets = generate_syndrome_data(data.synthetic, self.layout.data / "syndromes")
            identities = None
            if data.synthetic.identities >= 2:
                identities = generate_identity_data(data.synthetic, self.layout.data / "identities")
            return datasets["train"], datasets["test"], identities
        assert data.train_manifest is not None and data.test_manifest is not None  # checked by DataSection
        pretrain = load_manifest(self.config.resolve(data.pretrain_manifest)) if data.pretrain_manifest else None
        return (
            load_manifest(self.config.resolve(data.train_manifest)),
            load_manifest(self.config.resolve(data.test_manifest)),
            pretrain,
        )

    def preprocess(self) -> PreprocessSummary:
        config = self.config
        self.layout.root.mkdir(parents=True, exist_ok=True)
        write_config_snapshot(self.layout.config, config)

        train, test, pretrain = self.load_data()
        min_side = config.evaluation.min_image_side
        train, excluded = exclude_unusable(train, min_image_side=min_side)
        test, more = exclude_unusable(test, min_image_side=min_side)
        excluded += more
        test, more = deduplicate_and_exclude(test, train)
        excluded += more
        if pretrain is not None:
            pretrain, more = exclude_unusable(pretrain, min_image_side=min_side)
            excluded += more
            test, more = deduplicate_and_exclude(test, pretrain)
            excluded += more

        train, test = self.select(train, test)
        present = [label for label, count in train.class_counts().items() if count]
        if len(present) < self.min_classes:
            raise InsufficientClassesError(len(present), self.min_classes)
        if not len(test):
            raise EmptyCohortError("test")

        loader = SampleLoader(train)
        landmark_sets = [loader.landmarks(record) for record in train.records]
        template = build_canonical_template(
            [landmarks for landmarks in landmark_sets if landmarks is not None],
            config.preprocess.canvas_side,
            config.preprocess.iod_fraction,
        )
        save_template(self.layout.template, template)

        fit, val = split_dataset(train, config.experiment.train_fraction, config.seed)
        if pretrain is not None:
            pretrain, pretrain_val = split_dataset(pretrain, config.experiment.train_fraction, config.seed)
        else:
            pretrain, pretrain_val = fit, val
        splits = {"pretrain": pretrain, "pretrain_val": pretrain_val, "train": fit, "val": val, "test": test}
        counts: dict[str, dict[str, int]] = {}
        aligned: dict[str, list[np.ndarray]] = defaultdict(list)
        for split, dataset in splits.items():
            by_region = self.crop_dataset(dataset, template, aligned if split == "test" else None)
            counts[split] = {str(tag): len(data) for tag, data in by_region.items()}
            for tag, data in by_region.items():
                save_region_data(self.layout.crops(split, tag), data)

        composites: list[str] = []
        if config.evaluation.composites:
            for label in test.classes:
                if not aligned[label]:
                    continue
                name = f"{label}.png"
                save_composite(self.layout.composites / name, composite_photo(aligned[label], label))
                composites.append(f"{self.layout.composites.name}/{name}")

        head_labels = fit.classes
        summary = PreprocessSummary(
            kind=self.kind,
            head_labels=list(head_labels),
            eval_labels=list(self.scoring_labels(head_labels) or head_labels),
            test_labels={record.id: record.label for record in test.records},
            regions={str(tag): {split: counts[split].get(str(tag), 0) for split in splits} for tag in self.regions},
            exclusions=[ExclusionRecord(sample_id=e.sample_id, reason=e.reason) for e in excluded],
            cohorts={"train": cohort_statistics(fit), "test": cohort_statistics(test)},
            composites=composites,
        )
        summary.write(self.layout.summary)
        logger.info(
            f"preprocessed {len(fit)} train / {len(val)} val / {len(test)} test samples, {len(excluded)} excluded"
        )
        return summary

    def crop_dataset(
        self,
        dataset: Dataset,
        template: LandmarkSet,
        aligned: dict[str, list[np.ndarray]] | None = None,
    ) -> dict[RegionTag, RegionData]:
        """Aligns every sample and stacks its crops per region. Regions that could not be cut are skipped."""
        specs = self.config.region_specs()
        loader = SampleLoader(dataset)
        crops: dict[RegionTag, list[tuple[RegionCrop, str, str]]] = {spec.tag: [] for spec in specs}
        for record in dataset.records:
            landmarks = loader.landmarks(record)
            if landmarks is None:
                continue
            sample = preprocess_sample(
                loader.image(record), landmarks, template, specs, self.config.preprocess.canvas_side, record.id
            )
            if aligned is not None:
                aligned[record.label].append(sample.aligned)
            for tag, crop in sample.crops.items():
                if crop is not None:
                    crops[tag].append((crop, record.label, record.id))
        return {
            tag: RegionData.from_crops(
                [crop for crop, _, _ in items], [label for _, label, _ in items], dataset.classes, tuple(i for _, _, i in items)
            )
            for tag, items in crops.items()
            if items
        }

    def augmentation(self, tag: RegionTag) -> AugmentationPolicy:
        return self.config.augmentation.model_copy(update={"seed": region_seed(self.config.seed, tag)})

    def trainable_regions(self, split: str) -> list[RegionTag]:
        regions: list[RegionTag] = []
        for tag in self.regions:
            if self.layout.crops(split, tag).exists():
                regions.append(tag)
            else:
                logger.warning(f"no {split} crops for region {tag}; leaving it out")
        return regions

    def pretrain(self) -> dict[str, str]:
        jobs: list[Job] = []
        for tag in self.trainable_regions("pretrain"):
            val = self.layout.crops("pretrain_val", tag)
            jobs.append(
                RegionTrainingJob(
                    jobname=f"pretrain_{tag}",
                    stage="pretrain",
                    region=tag,
                    data_path=self.layout.crops("pretrain", tag),
                    val_path=val if val.exists() else None,
                    checkpoint_path=self.layout.checkpoint("pretrained", tag),
                    metrics_path=self.layout.metrics("pretrain", tag),
                    template_path=self.layout.template,
                    schedule=self.config.training_schedule,
                    architecture=self.config.architecture,
                    augmentation=self.augmentation(tag),
                    seed=region_seed(self.config.seed, tag),
                    config_snapshot=self.snapshot,
                )
            )
        return run_jobs(jobs, self.workers)

    def finetune(self) -> dict[str, str]:
        jobs: list[Job] = []
        for tag in self.trainable_regions("train"):
            base = self.layout.checkpoint("pretrained", tag)
            if not base.exists():
                raise MissingPathError(base, "pretrained checkpoint")
            val = self.layout.crops("val", tag)
            jobs.append(
                RegionTrainingJob(
                    jobname=f"finetune_{tag}",
                    stage="finetune",
                    region=tag,
                    data_path=self.layout.crops("train", tag),
                    val_path=val if val.exists() else None,
                    base_checkpoint=base,
                    checkpoint_path=self.layout.checkpoint("finetuned", tag),
                    metrics_path=self.layout.metrics("finetune", tag),
                    schedule=self.config.training_schedule,
                    architecture=self.config.architecture,
                    augmentation=self.augmentation(tag),
                    seed=region_seed(self.config.seed, tag),
                    head_init_scale=self.config.schedule.head_init_scale,
                    class_weighting=self.config.schedule.class_weighting,
                    config_snapshot=self.snapshot,
                )
            )
        return run_jobs(jobs, self.workers)

    def prediction_header(self, summary: PreprocessSummary, region: str | None = None) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "name": self.config.experiment.name,
            "seed": self.config.seed,
            "code_version": gestalt.__version__,
            "ensemble": self.config.ensemble.mode,
            "labels": summary.eval_labels,
            "region": region or "aggregated",
        }

    def predict(self) -> list[PredictionRecord]:
        summary = PreprocessSummary.read(self.layout.summary)
        eval_labels = tuple(summary.eval_labels)
        restrict = eval_labels != tuple(summary.head_labels)

        per_region: dict[RegionTag, dict[str, GestaltScores]] = {}
        for tag in self.regions:
            checkpoint, crops = self.layout.checkpoint("finetuned", tag), self.layout.crops("test", tag)
            if not (checkpoint.exists() and crops.exists()):
                continue
            model = load_region_model(checkpoint)
            data = load_region_data(crops)
            per_region[tag] = dict(zip(data.ids, predict_batch(model, data), strict=True))
            if gestalt.system_config.dump_activations and len(data):
                dump_activations(model, RegionCrop(tag, data.pixels[0]), self.layout.activations)
            records = [
                prediction_record(sample_id, scores.restricted(eval_labels) if restrict else scores, summary.test_labels[sample_id])
                for sample_id, scores in per_region[tag].items()
            ]
            write_predictions(self.layout.region_predictions(tag), records, self.prediction_header(summary, str(tag)))

        aggregated: list[PredictionRecord] = []
        for sample_id, label in summary.test_labels.items():
            available = [scores[sample_id] for scores in per_region.values() if sample_id in scores]
            if not available:
                logger.warning(f"{sample_id}: no region could score this sample, leaving it out")
                continue
            combined = aggregate(available, self.config.ensemble.mode)
            aggregated.append(prediction_record(sample_id, combined.restricted(eval_labels) if restrict else combined, label))
        write_predictions(self.layout.predictions, aggregated, self.prediction_header(summary))
        logger.info(f"wrote {len(aggregated)} aggregated predictions over {len(per_region)} regions")
        return aggregated

    def ks(self, classes: int) -> list[int]:
        """Configured K values that say something for this many classes"""
        return sorted({k for k in self.config.evaluation.top_k if k == 1 or k < classes})

    def topk_results(self, records: list[PredictionRecord], classes: int, permutation: bool = True) -> list[TopKResult]:
        ranked = [record.ranked_list for record in records]
        labels = [record.true_label or "" for record in records]
        ks = self.ks(classes)
        accuracies = topk_accuracies(ranked, labels, ks)
        results: list[TopKResult] = []
        for k in ks:
            test = None
            if permutation:
                test = permutation_test(ranked, labels, k, self.config.evaluation.permutation_draws, self.config.seed)
                logger.info(f"top-{k}: {accuracies[k]:.4f}, permuted mean {test.mean:.4f} (sd {test.sd:.4f}), p = {test.p_value:.2e}")
            results.append(TopKResult(k=k, accuracy=accuracies[k], permutation=test))
        return results

    def confusion(self, records: list[PredictionRecord], labels: list[str]) -> ConfusionReport:
        predicted = [record.ranked[0][0] for record in records]
        truth = [record.true_label or "" for record in records]
        matrix = confusion_matrix(predicted, truth, labels)
        return ConfusionReport(labels=labels, matrix=matrix.tolist(), support=matrix.sum(axis=1).tolist())

    def region_rows(self, records: list[PredictionRecord], classes: int) -> list[RegionRow]:
        rows: list[RegionRow] = []
        for tag in self.regions:
            path = self.layout.region_predictions(tag)
            if not path.exists():
                continue
            _, region_records = read_predictions(path)
            results = self.topk_results(region_records, classes, permutation=False)
            rows.append(RegionRow(region=str(tag), accuracies={r.k: r.accuracy for r in results}))
        aggregated = self.topk_results(records, classes, permutation=False)
        rows.append(RegionRow(region=AGGREGATED_ROW, accuracies={r.k: r.accuracy for r in aggregated}))
        return rows

    def evaluate(self) -> EvalReport:
        summary = PreprocessSummary.read(self.layout.summary)
        _, records = read_predictions(self.layout.predictions)
        if not records:
            raise EmptyCohortError("test")
        labels = summary.eval_labels
        document: dict[str, Any] = {
            "kind": self.kind,
            "name": self.config.experiment.name,
            "seed": self.config.seed,
            "code_version": gestalt.__version__,
            "samples": len(records),
            "classes": len(labels),
            "labels": labels,
            "topk": self.topk_results(records, len(labels)),
            "exclusions": summary.exclusions,
            "cohorts": summary.cohorts,
            "composites": summary.composites,
            "config": self.snapshot,
        }
        self.finish_report(document, records, summary)
        report = EvalReport.model_validate(document)
        write_report(self.layout.report, report)
        if self.config.evaluation.plots:
            self.plot(report)
        logger.info(f"wrote report to {self.layout.report}")
        return report

    def plot(self, report: EvalReport) -> None:
        if report.topk:
            plot_topk(report, self.layout.plots / "topk.png")
        if report.confusion is not None:
            plot_confusion(report.confusion, self.layout.plots / "confusion.png")
        if report.regions:
            accuracies = report.regions[-1].accuracies
            plot_regions(report.regions, 5 if 5 in accuracies else max(accuracies), self.layout.plots / "regions.png")

