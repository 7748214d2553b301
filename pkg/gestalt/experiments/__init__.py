from pathlib import Path

from gestalt.config import ExperimentConfig
from gestalt.evaluation import EvalReport
from gestalt.experiments.binary import BinaryExperiment, run_binary
from gestalt.experiments.multiclass import MulticlassExperiment, run_multiclass
from gestalt.experiments.pipeline import ExperimentDriver, PreprocessSummary, RunLayout, region_seed
from gestalt.experiments.registry import EXPERIMENT_REGISTRY, experiment
from gestalt.experiments.specialized import SpecializedExperiment, run_specialized


def get_driver(config: ExperimentConfig, out: Path, workers: int = 1) -> ExperimentDriver:
    return EXPERIMENT_REGISTRY[config.experiment.kind](config, out, workers)


def run_experiment(config: ExperimentConfig, out: Path, workers: int = 1) -> EvalReport:
    return get_driver(config, out, workers).run()


__all__ = [
    "EXPERIMENT_REGISTRY",
    "BinaryExperiment",
    "ExperimentDriver",
    "MulticlassExperiment",
    "PreprocessSummary",
    "RunLayout",
    "SpecializedExperiment",
    "experiment",
    "get_driver",
    "region_seed",
    "run_binary",
    "run_experiment",
    "run_multiclass",
    "run_specialized",
]
