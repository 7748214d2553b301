"""Deterministic splits, test-set construction rules and cohort summaries."""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from loguru import logger
from pydantic import BaseModel

from gestalt.dataio.manifest import Dataset, SampleRecord
from gestalt.dataio.samples import SampleLoader, content_hash
from gestalt.errors import MissingPathError

DEFAULT_MIN_IMAGE_SIDE = 100


@dataclass(frozen=True)
class Exclusion:
    sample_id: str
    reason: str


def split_dataset(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """
    Stratified random split into (train, val).

    Classes with at least 2 samples are split proportionally. The validation total is
    round((1 - train_fraction) * n) over those classes, handed out by largest remainder so the
    overall proportion holds when per-class shares are fractional; no class gives up its last
    training sample. Singleton classes go entirely to train.
    """
    if not 0 < train_fraction < 1:
        msg = f"train_fraction must be in (0, 1), got {train_fraction}"
        raise ValueError(msg)
    rng = np.random.default_rng(seed)

    by_class: dict[str, list[SampleRecord]] = {label: [] for label in dataset.classes}
    for record in dataset.records:
        by_class[record.label].append(record)

    strata = {label: records for label, records in by_class.items() if len(records) >= 2}
    for label, records in by_class.items():
        if len(records) == 1:
            logger.warning(f"class {label!r} has a single sample ({records[0].id}); keeping it in train")

    shares = {label: (1 - train_fraction) * len(records) for label, records in strata.items()}
    val_counts = {label: min(math.floor(share), len(strata[label]) - 1) for label, share in shares.items()}
    target = round((1 - train_fraction) * sum(len(records) for records in strata.values()))
    # largest remainder first, ties in class order
    order = sorted(strata, key=lambda label: -(shares[label] - math.floor(shares[label])))
    while sum(val_counts.values()) < target:
        grown = False
        for label in order:
            if sum(val_counts.values()) >= target:
                break
            if val_counts[label] < len(strata[label]) - 1:
                val_counts[label] += 1
                grown = True
        if not grown:
            break

    val_ids: set[str] = set()
    for label, records in strata.items():
        permutation = rng.permutation(len(records))
        val_ids.update(records[i].id for i in permutation[: val_counts[label]])

    train = [r.model_copy(update={"split": "train"}) for r in dataset.records if r.id not in val_ids]
    val = [r.model_copy(update={"split": "val"}) for r in dataset.records if r.id in val_ids]
    logger.debug(f"split {len(dataset)} samples into {len(train)} train / {len(val)} val (seed {seed})")
    return dataset.with_records(train), dataset.with_records(val)


def exclude_unusable(
    dataset: Dataset,
    loader: SampleLoader | None = None,
    min_image_side: int = DEFAULT_MIN_IMAGE_SIDE,
) -> tuple[Dataset, list[Exclusion]]:
    """Drops samples whose image is missing or smaller than min_image_side, or that have no landmarks"""
    loader = loader or SampleLoader(dataset)
    kept: list[SampleRecord] = []
    exclusions: list[Exclusion] = []
    for record in dataset.records:
        try:
            image = loader.image(record)
        except MissingPathError:
            exclusions.append(Exclusion(record.id, "image file missing"))
            continue
        if min(image.shape[:2]) < min_image_side:
            exclusions.append(Exclusion(record.id, f"image side {min(image.shape[:2])} < {min_image_side}"))
            continue
        if loader.landmarks(record) is None:
            exclusions.append(Exclusion(record.id, "no landmarks"))
            continue
        kept.append(record)
    for exclusion in exclusions:
        logger.warning(f"excluding {exclusion.sample_id}: {exclusion.reason}")
    return dataset.with_records(kept), exclusions


def _image_hasher(dataset: Dataset) -> Callable[[SampleRecord], str]:
    loader = SampleLoader(dataset)
    return lambda record: content_hash(loader.image(record))


def deduplicate_and_exclude(
    test_set: Dataset,
    train_set: Dataset,
    hasher: Callable[[Dataset, SampleRecord], str] | None = None,
) -> tuple[Dataset, list[Exclusion]]:
    """
    Removes test records whose decoded pixels also appear in the training set, and keeps only
    the first of several identical test images.
    """
    if hasher is None:
        train_hash, test_hash = _image_hasher(train_set), _image_hasher(test_set)
    else:
        train_hash = lambda record: hasher(train_set, record)  # noqa: E731
        test_hash = lambda record: hasher(test_set, record)  # noqa: E731

    train_hashes = {train_hash(record): record.id for record in train_set.records}
    seen: dict[str, str] = {}
    kept: list[SampleRecord] = []
    exclusions: list[Exclusion] = []
    for record in test_set.records:
        digest = test_hash(record)
        if digest in train_hashes:
            exclusions.append(Exclusion(record.id, f"same image as training sample {train_hashes[digest]}"))
        elif digest in seen:
            exclusions.append(Exclusion(record.id, f"duplicate of test sample {seen[digest]}"))
        else:
            seen[digest] = record.id
            kept.append(record)
    for exclusion in exclusions:
        logger.warning(f"excluding {exclusion.sample_id}: {exclusion.reason}")
    return test_set.with_records(kept), exclusions


class CohortStatistics(BaseModel):
    classes: int
    images: int
    median_per_class: float
    mean_per_class: float
    share_classes_1_to_5: float
    share_classes_6_plus: float
    per_class: dict[str, int]


def cohort_statistics(dataset: Dataset) -> CohortStatistics:
    """Support summary of a dataset. Classes with no samples are left out of the shares."""
    counts = {label: n for label, n in dataset.class_counts().items() if n > 0}
    values = np.array(list(counts.values()), dtype=np.float64)
    if values.size == 0:
        return CohortStatistics(
            classes=0,
            images=0,
            median_per_class=0.0,
            mean_per_class=0.0,
            share_classes_1_to_5=0.0,
            share_classes_6_plus=0.0,
            per_class={},
        )
    small = float(np.mean(values <= 5))
    return CohortStatistics(
        classes=len(counts),
        images=int(values.sum()),
        median_per_class=float(np.median(values)),
        mean_per_class=float(values.mean()),
        share_classes_1_to_5=small,
        share_classes_6_plus=1.0 - small,
        per_class=counts,
    )
