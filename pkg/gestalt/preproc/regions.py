from __future__ import annotations

from collections.abc import Iterable, Mapping
from typing import Any

import numpy as np
from skimage import filters
from skimage import transform as sktransform

from gestalt.errors import DegenerateGeometryError
from gestalt.preproc.alignment import to_grayscale
from gestalt.preproc.types import ANCHOR_NAMES, FloatArray, LandmarkSet, RegionCrop, RegionSpec, RegionTag

# Margins are fractions of the inter-ocular distance. Boxes are allowed to overlap.
DEFAULT_REGION_SPECS: dict[RegionTag, RegionSpec] = {
    RegionTag.FULL_FACE: RegionSpec(
        tag=RegionTag.FULL_FACE,
        anchors=ANCHOR_NAMES,
        margin_left=0.1,
        margin_right=0.1,
        margin_top=0.1,
        margin_bottom=0.1,
    ),
    RegionTag.EYES: RegionSpec(
        tag=RegionTag.EYES,
        anchors=("left_eye", "right_eye"),
        margin_left=0.4,
        margin_right=0.4,
        margin_top=0.3,
        margin_bottom=0.3,
    ),
    RegionTag.NOSE: RegionSpec(
        tag=RegionTag.NOSE,
        anchors=("nose_tip",),
        margin_left=0.35,
        margin_right=0.35,
        margin_top=0.5,
        margin_bottom=0.2,
    ),
    RegionTag.MIDDLE_FACE: RegionSpec(
        tag=RegionTag.MIDDLE_FACE,
        anchors=("left_ear", "right_ear", "nose_tip"),
        margin_left=0.05,
        margin_right=0.05,
        margin_top=0.4,
        margin_bottom=0.3,
    ),
    RegionTag.UPPER_HALF: RegionSpec(
        tag=RegionTag.UPPER_HALF,
        anchors=("forehead", "left_ear", "right_ear", "left_eye", "right_eye"),
        margin_left=0.05,
        margin_right=0.05,
        margin_top=0.1,
        margin_bottom=1.0,
        half="upper",
    ),
    RegionTag.LOWER_HALF: RegionSpec(
        tag=RegionTag.LOWER_HALF,
        anchors=("left_ear", "right_ear", "mouth_center", "chin"),
        margin_left=0.05,
        margin_right=0.05,
        margin_top=1.0,
        margin_bottom=0.1,
        half="lower",
    ),
}


def region_specs(
    tags: Iterable[RegionTag] | None = None,
    side: int = 100,
    overrides: Mapping[str, Mapping[str, Any]] | None = None,
) -> list[RegionSpec]:
    """Builds the region spec list for a run, applying per-region overrides from the config"""
    overrides = overrides or {}
    specs: list[RegionSpec] = []
    for tag in tags or list(RegionTag):
        base = DEFAULT_REGION_SPECS[RegionTag(tag)]
        update = {**overrides.get(str(tag), {}), "side": side}
        specs.append(RegionSpec.model_validate({**base.model_dump(), **update}))
    return specs


def region_box(landmarks: LandmarkSet, spec: RegionSpec) -> tuple[float, float, float, float]:
    """
    Returns (x0, y0, x1, y1) for a spec on a set of aligned landmarks.

    Raises DegenerateGeometryError when the resulting box has zero area.
    """
    anchors = landmarks.anchor_points(spec.anchors)
    iod = float(np.hypot(*(landmarks.anchor("right_eye") - landmarks.anchor("left_eye"))))
    x0, y0 = anchors.min(axis=0)
    x1, y1 = anchors.max(axis=0)
    x0 -= spec.margin_left * iod
    x1 += spec.margin_right * iod
    y0 -= spec.margin_top * iod
    y1 += spec.margin_bottom * iod
    if spec.half is not None:
        eye_line = (landmarks.anchor("left_eye")[1] + landmarks.anchor("right_eye")[1]) / 2
        split = float((eye_line + landmarks.anchor("mouth_center")[1]) / 2)
        if spec.half == "upper":
            y1 = min(y1, split)
        else:
            y0 = max(y0, split)
    if x1 - x0 <= 0 or y1 - y0 <= 0:
        msg = f"{spec.tag} anchors {spec.anchors} span a zero-area box"
        raise DegenerateGeometryError(msg)
    return float(x0), float(y0), float(x1), float(y1)


def extract_box(image: FloatArray, box: tuple[float, float, float, float], side: int) -> FloatArray:
    """
    Bilinear crop-and-resize of a box into a side x side grid, zero outside the image.
    Downscaling is Gaussian prefiltered the same way skimage.transform.resize anti-aliases.
    """
    x0, y0, x1, y1 = box
    sx, sy = (x1 - x0) / side, (y1 - y0) / side
    if sx > 1 or sy > 1:
        image = filters.gaussian(image, sigma=(max(0.0, (sy - 1) / 2), max(0.0, (sx - 1) / 2)), mode="constant")
    # output pixel centre (c, r) -> input (x0 + (c + 0.5) * sx - 0.5, y0 + (r + 0.5) * sy - 0.5)
    matrix = np.array(
        [
            [sx, 0.0, x0 + 0.5 * sx - 0.5],
            [0.0, sy, y0 + 0.5 * sy - 0.5],
            [0.0, 0.0, 1.0],
        ]
    )
    crop = sktransform.warp(
        image,
        sktransform.AffineTransform(matrix=matrix),
        output_shape=(side, side),
        order=1,
        mode="constant",
        cval=0.0,
        preserve_range=True,
    )
    return np.clip(crop, 0.0, 1.0)


def generate_regions(
    aligned_image: FloatArray,
    aligned_landmarks: LandmarkSet,
    specs: Iterable[RegionSpec],
) -> list[RegionCrop]:
    """One grayscale, [0, 1], side x side crop per spec, in spec order."""
    gray = np.clip(to_grayscale(aligned_image), 0.0, 1.0)
    height, width = gray.shape
    landmarks = aligned_landmarks.clamped(width, height)
    return [
        RegionCrop(spec.tag, extract_box(gray, region_box(landmarks, spec), spec.side)) for spec in specs
    ]
