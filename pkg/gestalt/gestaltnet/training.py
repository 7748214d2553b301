"""
Two-stage training of region experts: identity pretraining, then syndrome fine-tuning with a
fresh head. Each epoch is logged and, when a path is given, appended to a line-delimited JSON
metrics log.

Determinism: the visiting order of epoch e is `default_rng([seed, e])`, dropout masks come from
`default_rng([seed, e, 1])`, and augmentation draws per sample from the policy seed, the epoch
and the sample's position. Nothing depends on worker count.
"""

from __future__ import annotations

import copy
import json
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from loguru import logger

from gestalt.dataio import AugmentationPolicy, augment_batch
from gestalt.ensemble import GestaltScores
from gestalt.errors import DegenerateBatchError, InsufficientClassesError, PhaseError, RegionMismatchError
from gestalt.gestaltnet.architecture import ArchitectureConfig, build_descriptor
from gestalt.gestaltnet.model import RegionData, RegionModel
from gestalt.gestaltnet.schedule import PhaseSchedule, Stage, TrainingSchedule
from gestalt.nn import Network, init_xavier_modified, optimizer_step, softmax_cross_entropy
from gestalt.preproc import LandmarkSet, RegionCrop


@dataclass
class EpochMetrics:
    region: str
    stage: Stage
    phase: int
    epoch: int
    loss: float
    train_top1: float
    val_top1: float | None

    def as_record(self) -> dict[str, Any]:
        return {
            "region": self.region,
            "stage": self.stage,
            "phase": self.phase,
            "epoch": self.epoch,
            "loss": self.loss,
            "train_top1": self.train_top1,
            "val_top1": self.val_top1,
        }


class MetricsLog:
    """Appends one JSON object per epoch to a file. Without a path it only keeps the history."""

    def __init__(self, path: Path | None = None):
        self.path = path
        self.history: list[EpochMetrics] = []
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text("", encoding="utf-8")

    def append(self, metrics: EpochMetrics) -> None:
        self.history.append(metrics)
        logger.info(
            f"{metrics.region} {metrics.stage} epoch {metrics.epoch}: loss {metrics.loss:.4f}, "
            f"train top-1 {metrics.train_top1:.3f}"
            + (f", val top-1 {metrics.val_top1:.3f}" if metrics.val_top1 is not None else "")
        )
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as f:
                f.write(json.dumps(metrics.as_record(), sort_keys=True) + "\n")


def inverse_frequency_weights(labels: np.ndarray, classes: int) -> np.ndarray:
    """n / (classes * count) per class; classes without samples get weight 0"""
    counts = np.bincount(labels, minlength=classes).astype(np.float64)
    weights = np.zeros(classes)
    present = counts > 0
    weights[present] = len(labels) / (int(present.sum()) * counts[present])
    return weights


def batches(order: np.ndarray, batch_size: int) -> list[np.ndarray]:
    """Splits an epoch's order into batches; a trailing batch of one joins the previous batch."""
    if len(order) < 2:
        raise DegenerateBatchError(len(order))
    chunks = [order[start : start + batch_size] for start in range(0, len(order), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2] = np.concatenate((chunks[-2], chunks.pop()))
    return chunks


def top1(model: RegionModel, data: RegionData) -> float:
    predictions = model.logits(data.pixels).argmax(axis=1)
    return float(np.mean(predictions == data.labels)) if len(data) else 0.0


def train_stage(
    model: RegionModel,
    data: RegionData,
    phases: Sequence[PhaseSchedule],
    batch_size: int,
    seed: int,
    stage: Stage,
    policy: AugmentationPolicy | None = None,
    val: RegionData | None = None,
    metrics: MetricsLog | None = None,
    class_weights: np.ndarray | None = None,
) -> RegionModel:
    """Runs every phase in order, one fresh optimizer state per phase. The model is updated in place."""
    metrics = metrics or MetricsLog()
    network = model.network
    params = network.parameters()
    epoch = 0
    for phase_index, phase in enumerate(phases):
        state = phase.optimizer_state()
        model.optimizer = state
        for _ in range(phase.epochs):
            order = np.random.default_rng([seed, epoch]).permutation(len(data))
            dropout_rng = np.random.default_rng([seed, epoch, 1])
            losses: list[float] = []
            correct = 0
            for indices in batches(order, batch_size):
                pixels = data.pixels[indices]
                if policy is not None:
                    pixels = augment_batch(pixels, data.region, policy, epoch, indices)
                logits, _ = network.forward(pixels[:, None, :, :], train=True, rng=dropout_rng)
                loss, dlogits = softmax_cross_entropy(logits, data.labels[indices], class_weights)
                network.backward(dlogits)
                optimizer_step(params, network.gradients(), state)
                losses.append(loss * len(indices))
                correct += int(np.sum(logits.argmax(axis=1) == data.labels[indices]))
            metrics.append(
                EpochMetrics(
                    region=str(data.region),
                    stage=stage,
                    phase=phase_index,
                    epoch=epoch,
                    loss=float(sum(losses) / len(data)),
                    train_top1=correct / len(data),
                    val_top1=top1(model, val) if val is not None and len(val) else None,
                )
            )
            epoch += 1
    model.metadata.setdefault("epochs", {})[stage] = epoch
    return model


def pretrain_region(
    data: RegionData,
    schedule: TrainingSchedule,
    seed: int,
    architecture: ArchitectureConfig | None = None,
    policy: AugmentationPolicy | None = None,
    val: RegionData | None = None,
    metrics_path: Path | None = None,
    template: LandmarkSet | None = None,
) -> RegionModel:
    """Trains a fresh network on identity labels with the pretraining phases."""
    classes = len(data.classes)
    if classes < 2:
        raise InsufficientClassesError(classes)
    architecture = architecture or ArchitectureConfig(input_side=data.pixels.shape[-1])
    descriptor = build_descriptor(architecture, classes)
    network = Network(descriptor.layers, descriptor.input_shape, seed=np.random.default_rng([seed, 0]))
    model = RegionModel(
        region=data.region,
        descriptor=descriptor,
        network=network,
        phase="pretrained",
        labels=data.classes,
        template=template,
        metadata={"seeds": {"pretrain": seed}, "scale_factor": schedule.scale_factor},
    )
    logger.info(f"pretraining {data.region} on {len(data)} crops over {classes} identities")
    train_stage(
        model,
        data,
        schedule.phases("pretrain"),
        schedule.batch_size,
        seed,
        "pretrain",
        policy,
        val,
        MetricsLog(metrics_path),
    )
    return model


def replace_head(base: RegionModel, labels: tuple[str, ...], head_init_scale: float = 0.3, seed: int = 0) -> RegionModel:
    """
    New model for `labels` that shares every non-head tensor value with `base` (copied bit for
    bit) and has a head drawn from the Xavier-modified initializer with zero bias.
    """
    if base.phase != "pretrained":
        raise PhaseError("pretrained", base.phase)
    if len(labels) < 2:
        raise InsufficientClassesError(len(labels))
    descriptor = base.descriptor.with_classes(len(labels))
    network = Network(descriptor.layers, descriptor.input_shape, seed=np.random.default_rng([seed, 0]))
    head = network.head
    state = {key: value for key, value in base.network.state().items() if not key.startswith(f"{head.name}.")}
    state.update({f"{head.name}.{key}": value for key, value in head.params.items()})
    network.load_state(state)
    head.params["weight"] = init_xavier_modified(
        head.params["weight"].shape, head_init_scale, np.random.default_rng([seed, 1]), network.dtype
    )
    head.params["bias"] = np.zeros_like(head.params["bias"])
    metadata = copy.deepcopy(base.metadata)
    metadata.setdefault("seeds", {})["finetune"] = seed
    metadata["head_init_scale"] = head_init_scale
    return RegionModel(
        region=base.region,
        descriptor=descriptor,
        network=network,
        phase="finetuned",
        labels=labels,
        template=base.template,
        metadata=metadata,
    )


def finetune_region(
    base: RegionModel,
    data: RegionData,
    schedule: TrainingSchedule,
    seed: int,
    head_init_scale: float = 0.3,
    policy: AugmentationPolicy | None = None,
    val: RegionData | None = None,
    metrics_path: Path | None = None,
    class_weighting: bool = False,
) -> RegionModel:
    """Replaces the head of a pretrained model and trains everything with the fine-tuning phases."""
    if base.region != data.region:
        raise RegionMismatchError(str(base.region), str(data.region))
    model = replace_head(base, data.classes, head_init_scale, seed)
    weights = inverse_frequency_weights(data.labels, len(data.classes)) if class_weighting else None
    model.metadata["class_weighting"] = class_weighting
    logger.info(f"fine-tuning {data.region} on {len(data)} crops over {len(data.classes)} classes")
    return train_stage(
        model,
        data,
        schedule.phases("finetune"),
        schedule.batch_size,
        seed,
        "finetune",
        policy,
        val,
        MetricsLog(metrics_path),
        weights,
    )


def _check_predictable(model: RegionModel, region: str) -> None:
    if model.phase != "finetuned":
        raise PhaseError("finetuned", model.phase)
    if str(model.region) != region:
        raise RegionMismatchError(str(model.region), region)


def predict_region(model: RegionModel, crop: RegionCrop) -> GestaltScores:
    """Softmax scores of one crop over the model's labels, in inference mode."""
    _check_predictable(model, str(crop.tag))
    logits = model.logits(crop.pixels[None].astype(np.float32))[0]
    return GestaltScores.from_logits(model.labels, logits, str(model.region))


def predict_batch(model: RegionModel, data: RegionData) -> list[GestaltScores]:
    _check_predictable(model, str(data.region))
    return [GestaltScores.from_logits(model.labels, row, str(model.region)) for row in model.logits(data.pixels)]


def dump_activations(model: RegionModel, crop: RegionCrop, out_dir: Path) -> list[Path]:
    """Writes the output of every pooling layer for one crop as `<region>_<layer>.npy`"""
    pools = [layer.name for layer in model.network.layers if layer.spec.kind == "pool"]
    _, captured = model.network.forward(crop.pixels[None, None].astype(np.float32), train=False, capture=pools)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    for name in pools:
        path = out_dir / f"{model.region}_{name}.npy"
        np.save(path, captured[name][0])
        paths.append(path)
    logger.debug(f"dumped {len(paths)} activations for {model.region} to {out_dir}")
    return paths


def dataset_loss(model: RegionModel, data: RegionData, dropout_seed: int = 0) -> float:
    """
    Mean training-mode loss over the whole dataset as one batch, without touching the running
    statistics. A fixed dropout seed makes it a deterministic function of the parameters.
    """
    logits, _ = model.network.forward(
        data.pixels[:, None, :, :], train=True, rng=np.random.default_rng(dropout_seed), update_stats=False
    )
    return softmax_cross_entropy(logits, data.labels)[0]
