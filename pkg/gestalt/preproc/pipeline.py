from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from gestalt.errors import DegenerateGeometryError
from gestalt.preproc.alignment import apply_alignment, estimate_alignment, to_grayscale
from gestalt.preproc.regions import extract_box, region_box
from gestalt.preproc.types import FloatArray, LandmarkSet, RegionCrop, RegionSpec, RegionTag, SimilarityTransform


@dataclass
class PreprocessedSample:
    """
    Output of the preprocessing chain for one image.

    attributes:
        aligned: grayscale image on the template canvas
        landmarks: landmarks mapped onto the canvas
        transform: input -> canvas similarity
        crops: region tag -> crop, or None when the region could not be cut
    """

    aligned: FloatArray
    landmarks: LandmarkSet
    transform: SimilarityTransform
    crops: dict[RegionTag, RegionCrop | None] = field(default_factory=dict[RegionTag, RegionCrop | None])

    @property
    def missing_regions(self) -> list[RegionTag]:
        return [tag for tag, crop in self.crops.items() if crop is None]


def preprocess_sample(
    image: NDArray[np.generic],
    landmarks: LandmarkSet,
    template: LandmarkSet,
    specs: list[RegionSpec],
    canvas_side: int,
    sample_id: str = "",
) -> PreprocessedSample:
    """
    grayscale -> align to the template -> cut every region.

    A region whose box degenerates is recorded as missing instead of failing the whole sample.
    """
    gray = to_grayscale(image)
    transform = estimate_alignment(landmarks, template)
    aligned = np.clip(apply_alignment(gray, transform, (canvas_side, canvas_side)), 0.0, 1.0)
    aligned_landmarks = landmarks.transformed(transform).clamped(canvas_side, canvas_side)

    crops: dict[RegionTag, RegionCrop | None] = {}
    for spec in specs:
        try:
            box = region_box(aligned_landmarks, spec)
        except DegenerateGeometryError as e:
            logger.warning(f"{sample_id or 'sample'}: dropping region {spec.tag}: {e}")
            crops[spec.tag] = None
            continue
        crops[spec.tag] = RegionCrop(spec.tag, extract_box(aligned, box, spec.side))
    return PreprocessedSample(aligned=aligned, landmarks=aligned_landmarks, transform=transform, crops=crops)
