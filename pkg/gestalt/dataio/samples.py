from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from skimage import io as skio

from gestalt.dataio.manifest import Dataset, SampleRecord
from gestalt.errors import MissingPathError
from gestalt.preproc import LandmarkSet, load_annotations, to_grayscale


def read_image(path: Path) -> NDArray[np.generic]:
    if not path.exists():
        raise MissingPathError(path, "image")
    return skio.imread(path)


def content_hash(image: NDArray[np.generic]) -> str:
    """sha256 over the decoded 8-bit grayscale pixels, so re-encoded copies of an image collide"""
    gray = np.round(to_grayscale(image) * 255).astype(np.uint8)
    digest = hashlib.sha256()
    digest.update(np.asarray(gray.shape, dtype=np.int64).tobytes())
    digest.update(gray.tobytes())
    return digest.hexdigest()


@dataclass
class SampleLoader:
    """
    Resolves images and landmarks for the records of one dataset.

    Landmark files are annotation files keyed by image path. A file holding a single record is
    used for its sample whatever the key. Parsed files are cached.
    """

    dataset: Dataset
    _annotations: dict[Path, dict[str, LandmarkSet]] = field(default_factory=dict[Path, dict[str, LandmarkSet]])

    def image(self, record: SampleRecord) -> NDArray[np.generic]:
        return read_image(self.dataset.image_path(record))

    def landmarks(self, record: SampleRecord) -> LandmarkSet | None:
        """Returns None when the record has no usable landmark annotation"""
        if not record.landmark_path:
            return None
        path = self.dataset.landmark_path(record)
        if path not in self._annotations:
            self._annotations[path] = load_annotations(path) if path.exists() else {}
        annotations = self._annotations[path]
        if record.image_path in annotations:
            return annotations[record.image_path]
        if len(annotations) == 1:
            return next(iter(annotations.values()))
        return None
