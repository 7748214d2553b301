from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import numpy as np
from skimage import io as skio
from skimage.util import img_as_ubyte

from gestalt.errors import EmptyCohortError, ShapeMismatchError


def composite_photo(aligned_images: Sequence[np.ndarray], cohort: str = "cohort") -> np.ndarray:
    """Per-pixel arithmetic mean of equally sized aligned images"""
    if not aligned_images:
        raise EmptyCohortError(cohort)
    shape = aligned_images[0].shape
    for image in aligned_images[1:]:
        if image.shape != shape:
            raise ShapeMismatchError("composite_photo", shape, image.shape)
    return np.mean(np.stack([np.asarray(image, dtype=np.float64) for image in aligned_images]), axis=0)


def save_composite(path: Path, composite: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    skio.imsave(path, img_as_ubyte(np.clip(composite, 0.0, 1.0)), check_contrast=False)
