"""
Parametric face-like images for desk-scale runs and tests.

Every class owns an appearance: skin tone, the period of a horizontal texture, the intensity of the
eye, nose, mouth and ear blobs, and a small offset of the landmark geometry. The values are spread
over evenly spaced grids and shuffled per attribute, so any two classes differ in several places and
every facial region carries class signal. Samples add a random pose, amplitude jitter, texture phase
and pixel noise.

A dataset directory holds `images/*.png`, one shared `landmarks.tsv` annotation file in the
synthetic8 schema and one manifest per split.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from skimage import io as skio
from skimage.util import img_as_ubyte

from gestalt.dataio.manifest import Dataset, SampleRecord, write_manifest
from gestalt.preproc import SYNTHETIC8, LandmarkSet, SimilarityTransform, write_annotations
from gestalt.preproc.landmarks import SYNTHETIC8_FRONTAL

LANDMARK_FILE = "landmarks.tsv"

# face ellipse in the 100 x 100 frontal frame
FACE_CENTRE = (50.0, 53.0)
FACE_AXES = (36.0, 44.0)
BACKGROUND = 0.12

# keep syndrome and identity draws apart even with equal seeds
_SYNDROME_STREAM = 1
_IDENTITY_STREAM = 2


class SyntheticConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    classes: int = Field(default=8, ge=1)
    labels: list[str] | None = None
    train_per_class: int = Field(default=25, ge=0)
    test_per_class: int = Field(default=10, ge=0)
    identities: int = Field(default=10, ge=0)
    images_per_identity: int = Field(default=20, ge=1)
    image_side: int = Field(default=128, ge=32)
    noise: float = Field(default=0.03, ge=0.0)
    max_rotation: float = Field(default=0.15, ge=0.0)
    seed: int = 0

    def class_labels(self) -> list[str]:
        if self.labels is not None:
            return list(self.labels)
        return [f"syndrome_{k:02d}" for k in range(self.classes)]


@dataclass(frozen=True)
class ClassAppearance:
    skin: float
    stripe_period: float
    stripe_amplitude: float
    eye: float
    nose: float
    mouth: float
    ear: float
    geometry: np.ndarray  # (8, 2) offset added to the frontal landmarks


def _grid(rng: np.random.Generator, n: int, low: float, high: float) -> np.ndarray:
    return rng.permutation(np.linspace(low, high, n)) if n > 1 else np.array([(low + high) / 2])


def class_appearances(n: int, seed: int, stream: int = _SYNDROME_STREAM) -> list[ClassAppearance]:
    rng = np.random.default_rng([seed, stream])
    skin = _grid(rng, n, 0.38, 0.72)
    period = _grid(rng, n, 7.0, 26.0)
    eye = _grid(rng, n, 0.02, 0.3)
    nose = _grid(rng, n, 0.75, 1.0)
    mouth = _grid(rng, n, 0.05, 0.35)
    ear = _grid(rng, n, 0.2, 0.9)
    appearances: list[ClassAppearance] = []
    for k in range(n):
        geometry = np.zeros((len(SYNTHETIC8_FRONTAL), 2))
        spread, nose_drop, mouth_drop = rng.uniform(-4, 4), rng.uniform(-3, 3), rng.uniform(-3, 3)
        geometry[0, 0], geometry[1, 0] = -spread, spread
        geometry[2, 1] = nose_drop
        geometry[3, 1] = mouth_drop
        appearances.append(
            ClassAppearance(
                skin=float(skin[k]),
                stripe_period=float(period[k]),
                stripe_amplitude=0.12,
                eye=float(eye[k]),
                nose=float(nose[k]),
                mouth=float(mouth[k]),
                ear=float(ear[k]),
                geometry=geometry,
            )
        )
    return appearances


def _blob(ux: np.ndarray, uy: np.ndarray, centre: np.ndarray, sx: float, sy: float) -> np.ndarray:
    return np.exp(-0.5 * (((ux - centre[0]) / sx) ** 2 + ((uy - centre[1]) / sy) ** 2))


def random_pose(rng: np.random.Generator, side: int, max_rotation: float) -> SimilarityTransform:
    """Frontal frame -> image pixels"""
    scale = side / 100 * 0.85 * rng.uniform(0.92, 1.08)
    rotation = rng.uniform(-max_rotation, max_rotation)
    target = side / 2 + rng.uniform(-0.04, 0.04, size=2) * side
    c, s = np.cos(rotation), np.sin(rotation)
    rotated_centre = scale * np.array([c * FACE_CENTRE[0] - s * FACE_CENTRE[1], s * FACE_CENTRE[0] + c * FACE_CENTRE[1]])
    translation = target - rotated_centre
    return SimilarityTransform(float(scale), float(rotation), (float(translation[0]), float(translation[1])))


def render_face(
    appearance: ClassAppearance,
    pose: SimilarityTransform,
    side: int,
    rng: np.random.Generator,
    noise: float = 0.03,
) -> tuple[np.ndarray, LandmarkSet]:
    """Returns a float image in [0, 1] and its synthetic8 landmarks in image pixels."""
    frontal = SYNTHETIC8_FRONTAL + appearance.geometry
    rows, cols = np.mgrid[0:side, 0:side].astype(np.float64)
    frame = pose.inverse().apply(np.column_stack((cols.ravel(), rows.ravel())))
    ux, uy = frame[:, 0].reshape(side, side), frame[:, 1].reshape(side, side)

    amplitude = appearance.stripe_amplitude * rng.uniform(0.85, 1.15)
    phase = rng.uniform(0, 2 * np.pi)
    face = appearance.skin + rng.uniform(-0.01, 0.01) + amplitude * np.sin(2 * np.pi * uy / appearance.stripe_period + phase)
    for index, value, sx, sy in (
        (0, appearance.eye, 5.0, 3.5),
        (1, appearance.eye, 5.0, 3.5),
        (4, appearance.ear, 4.0, 7.0),
        (5, appearance.ear, 4.0, 7.0),
        (3, appearance.mouth, 9.0, 3.0),
    ):
        weight = _blob(ux, uy, frontal[index], sx, sy)
        face = face + (value - face) * weight
    nose_weight = _blob(ux, uy, frontal[2] - np.array([0.0, 5.0]), 3.5, 7.0)
    face = face + (appearance.nose - face) * nose_weight

    radius = np.hypot((ux - FACE_CENTRE[0]) / FACE_AXES[0], (uy - FACE_CENTRE[1]) / FACE_AXES[1])
    mask = 1 / (1 + np.exp(np.clip((radius - 1) * 40, -50, 50)))
    image = BACKGROUND * (1 - mask) + face * mask + rng.normal(0, noise, size=(side, side))

    points = pose.apply(frontal) + rng.normal(0, 0.3, size=frontal.shape)
    return np.clip(image, 0.0, 1.0), LandmarkSet(points, SYNTHETIC8)


def _write_samples(
    out_dir: Path,
    labels: list[str],
    appearances: list[ClassAppearance],
    counts: dict[str, int],
    config: SyntheticConfig,
    stream: int,
    prefix: str,
) -> dict[str, Dataset]:
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    annotations: list[tuple[str, LandmarkSet]] = []
    by_split: dict[str, list[SampleRecord]] = {split: [] for split in counts}
    for k, (label, appearance) in enumerate(zip(labels, appearances, strict=True)):
        index = 0
        for split, count in counts.items():
            for _ in range(count):
                rng = np.random.default_rng([config.seed, stream, k, index])
                pose = random_pose(rng, config.image_side, config.max_rotation)
                image, landmarks = render_face(appearance, pose, config.image_side, rng, config.noise)
                sample_id = f"{prefix}{k:03d}_{index:04d}"
                image_path = f"images/{sample_id}.png"
                skio.imsave(out_dir / image_path, img_as_ubyte(image), check_contrast=False)
                annotations.append((image_path, landmarks))
                by_split[split].append(
                    SampleRecord(id=sample_id, image_path=image_path, landmark_path=LANDMARK_FILE, label=label, split=split)  # pyright: ignore[reportArgumentType]
                )
                index += 1
    write_annotations(out_dir / LANDMARK_FILE, annotations)

    datasets: dict[str, Dataset] = {}
    for split, records in by_split.items():
        dataset = Dataset(tuple(records), tuple(labels), out_dir)
        write_manifest(dataset, out_dir / f"{split}.tsv")
        datasets[split] = dataset
    logger.info(f"wrote {len(annotations)} synthetic images over {len(labels)} classes to {out_dir}")
    return datasets


def generate_syndrome_data(config: SyntheticConfig, out_dir: Path) -> dict[str, Dataset]:
    """Writes train.tsv and test.tsv manifests (plus images and landmarks) under out_dir"""
    labels = config.class_labels()
    appearances = class_appearances(len(labels), config.seed, _SYNDROME_STREAM)
    counts = {"train": config.train_per_class, "test": config.test_per_class}
    return _write_samples(out_dir, labels, appearances, counts, config, _SYNDROME_STREAM, "s")


def generate_identity_data(config: SyntheticConfig, out_dir: Path) -> Dataset:
    """Writes a train.tsv identity manifest for pretraining under out_dir"""
    labels = [f"identity_{k:03d}" for k in range(config.identities)]
    appearances = class_appearances(len(labels), config.seed, _IDENTITY_STREAM)
    counts = {"train": config.images_per_identity}
    return _write_samples(out_dir, labels, appearances, counts, config, _IDENTITY_STREAM, "i")["train"]
