from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np

import gestalt
from gestalt.errors import InvariantViolation, ParseError, RegionMismatchError
from gestalt.gestaltnet.architecture import ArchitectureDescriptor
from gestalt.nn import Network, OptimizerState, load_checkpoint, save_checkpoint
from gestalt.preproc import LandmarkSet, RegionCrop, RegionTag, get_schema

Phase = Literal["pretrained", "finetuned"]

# inference runs in fixed-size chunks so batch composition never changes the arithmetic
PREDICT_CHUNK = 64


@dataclass
class RegionData:
    """
    Stacked crops of one region with integer labels.

    attributes:
        region: tag shared by every crop
        pixels: (N, side, side) grayscale crops in [0, 1]
        labels: (N,) indices into `classes`
        classes: label list
        ids: sample ids, parallel to pixels
    """

    region: RegionTag
    pixels: np.ndarray
    labels: np.ndarray
    classes: tuple[str, ...]
    ids: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.pixels) != len(self.labels):
            msg = f"{len(self.pixels)} crops but {len(self.labels)} labels"
            raise InvariantViolation("one label per crop", msg)

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def from_crops(
        cls,
        crops: list[RegionCrop],
        labels: list[str],
        classes: tuple[str, ...],
        ids: tuple[str, ...] = (),
    ) -> RegionData:
        if not crops:
            msg = "cannot build region data from zero crops"
            raise InvariantViolation("non-empty region data", msg)
        region = crops[0].tag
        for crop in crops[1:]:
            if crop.tag != region:
                raise RegionMismatchError(str(region), str(crop.tag))
        pixels = np.stack([crop.pixels for crop in crops]).astype(np.float32)
        return cls(region, pixels, np.array([classes.index(label) for label in labels]), classes, ids)

    def subset(self, indices: np.ndarray) -> RegionData:
        ids = tuple(self.ids[i] for i in indices) if self.ids else ()
        return RegionData(self.region, self.pixels[indices], self.labels[indices], self.classes, ids)


@dataclass
class RegionModel:
    """
    One region expert: network, descriptor, training phase and label list.

    `metadata` carries seeds, epoch counts and the schedule the model was trained with. It is
    written into the checkpoint manifest as is.
    """

    region: RegionTag
    descriptor: ArchitectureDescriptor
    network: Network
    phase: Phase
    labels: tuple[str, ...]
    template: LandmarkSet | None = None
    optimizer: OptimizerState | None = None
    metadata: dict[str, Any] = field(default_factory=dict[str, Any])

    def __post_init__(self):
        if self.network.output_shape != (self.descriptor.classes,):
            raise InvariantViolation("parameters match descriptor", f"{self.network.output_shape} vs {self.descriptor.classes}")
        if len(self.labels) != self.descriptor.classes:
            raise InvariantViolation("one label per head unit", f"{len(self.labels)} vs {self.descriptor.classes}")
        if self.phase == "finetuned" and not self.labels:
            raise InvariantViolation("finetuned models have labels")

    def logits(self, pixels: np.ndarray) -> np.ndarray:
        """Inference-mode logits for (N, side, side) crops, as float64"""
        batch = pixels[:, None, :, :]
        chunks = [
            self.network.forward(batch[start : start + PREDICT_CHUNK], train=False)[0].astype(np.float64)
            for start in range(0, len(batch), PREDICT_CHUNK)
        ]
        return np.concatenate(chunks) if chunks else np.zeros((0, self.descriptor.classes))


def _template_manifest(template: LandmarkSet | None) -> dict[str, Any] | None:
    if template is None:
        return None
    return {"schema": template.schema.name, "points": template.flattened()}


def region_model_manifest(model: RegionModel, config_snapshot: dict[str, Any] | None = None) -> dict[str, Any]:
    return {
        "kind": "gestalt.region_model",
        "code_version": gestalt.__version__,
        "region": str(model.region),
        "phase": model.phase,
        "labels": list(model.labels),
        "descriptor": model.descriptor.model_dump(mode="json"),
        "template": _template_manifest(model.template),
        "optimizer": model.optimizer.hyperparameters() if model.optimizer else None,
        "metadata": model.metadata,
        "config": config_snapshot or {},
    }


def region_model_tensors(model: RegionModel) -> dict[str, np.ndarray]:
    tensors = {f"params/{key}": value for key, value in model.network.parameters().items()}
    tensors.update({f"buffers/{key}": value for key, value in model.network.buffers().items()})
    if model.optimizer is not None:
        tensors.update({f"optimizer/{key}": value for key, value in model.optimizer.buffers().items()})
    return tensors


def save_region_model(path: Path, model: RegionModel, config_snapshot: dict[str, Any] | None = None) -> None:
    save_checkpoint(path, region_model_tensors(model), region_model_manifest(model, config_snapshot))


def load_region_model(path: Path) -> RegionModel:
    tensors, manifest = load_checkpoint(path)
    if manifest.get("kind") != "gestalt.region_model":
        raise ParseError(path, 0, f"not a region model checkpoint (kind {manifest.get('kind')!r})")
    descriptor = ArchitectureDescriptor.model_validate(manifest["descriptor"])
    network = Network(descriptor.layers, descriptor.input_shape, seed=0)
    state = {key.split("/", 1)[1]: value for key, value in tensors.items() if key.startswith(("params/", "buffers/"))}
    network.load_state(state)

    optimizer = None
    if manifest.get("optimizer"):
        hyper = dict(manifest["optimizer"])
        optimizer = OptimizerState(
            kind=hyper["kind"],
            learning_rate=hyper["learning_rate"],
            beta1=hyper["beta1"],
            beta2=hyper["beta2"],
            epsilon=hyper["epsilon"],
            momentum=hyper["momentum"],
            timestep=hyper["timestep"],
        )
        optimizer.load_buffers(
            {key.split("/", 1)[1]: value for key, value in tensors.items() if key.startswith("optimizer/")}
        )

    template = None
    if manifest.get("template"):
        schema = get_schema(manifest["template"]["schema"])
        template = LandmarkSet(np.array(manifest["template"]["points"]).reshape(-1, 2), schema)

    return RegionModel(
        region=RegionTag(manifest["region"]),
        descriptor=descriptor,
        network=network,
        phase=manifest["phase"],
        labels=tuple(manifest["labels"]),
        template=template,
        optimizer=optimizer,
        metadata=manifest.get("metadata", {}),
    )


def save_region_data(path: Path, data: RegionData) -> None:
    """Stores stacked crops in the checkpoint archive format so crop files are byte-stable too"""
    manifest = {
        "kind": "gestalt.region_data",
        "code_version": gestalt.__version__,
        "region": str(data.region),
        "classes": list(data.classes),
        "ids": list(data.ids),
    }
    save_checkpoint(path, {"pixels": data.pixels, "labels": data.labels.astype(np.int64)}, manifest)


def load_region_data(path: Path) -> RegionData:
    tensors, manifest = load_checkpoint(path)
    if manifest.get("kind") != "gestalt.region_data":
        raise ParseError(path, 0, f"not a region data archive (kind {manifest.get('kind')!r})")
    return RegionData(
        region=RegionTag(manifest["region"]),
        pixels=tensors["pixels"],
        labels=tensors["labels"],
        classes=tuple(manifest["classes"]),
        ids=tuple(manifest["ids"]),
    )
