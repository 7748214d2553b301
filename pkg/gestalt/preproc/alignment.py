from __future__ import annotations

import numpy as np
from numpy.typing import NDArray
from skimage import transform as sktransform

from gestalt.errors import DegenerateGeometryError, ShapeMismatchError
from gestalt.preproc.types import FloatArray, LandmarkSet, SimilarityTransform

# ITU-R BT.601 luma
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def to_grayscale(image: NDArray[np.generic]) -> FloatArray:
    """Converts a grayscale or RGB(A) image of any dtype into a float grayscale image in [0, 1]."""
    pixels = np.asarray(image)
    if np.issubdtype(pixels.dtype, np.integer):
        pixels = pixels / float(np.iinfo(pixels.dtype).max)
    pixels = pixels.astype(np.float64)
    if pixels.ndim == 2:
        return pixels
    if pixels.ndim == 3 and pixels.shape[2] in (3, 4):
        return pixels[:, :, :3] @ LUMA_WEIGHTS
    raise ShapeMismatchError("to_grayscale", "(H, W) or (H, W, 3|4)", pixels.shape)


def estimate_alignment(landmarks: LandmarkSet, canonical: LandmarkSet) -> SimilarityTransform:
    """
    Least-squares similarity transform mapping `landmarks` onto `canonical`.

    Uses the Umeyama closed form (via skimage), which gives the global minimum of the
    similarity-constrained objective and never returns a reflection.
    """
    if landmarks.schema_size != canonical.schema_size:
        raise ShapeMismatchError("estimate_alignment", canonical.points.shape, landmarks.points.shape)
    if landmarks.schema_size < 2:
        msg = "need at least 2 landmarks"
        raise DegenerateGeometryError(msg)
    for name, points in (("input", landmarks.points), ("canonical", canonical.points)):
        if np.all(np.ptp(points, axis=0) == 0):
            msg = f"all {name} landmarks coincide"
            raise DegenerateGeometryError(msg)

    tform = sktransform.SimilarityTransform()
    if not tform.estimate(landmarks.points, canonical.points):
        msg = "similarity estimation failed"
        raise DegenerateGeometryError(msg)
    return SimilarityTransform.from_matrix(tform.params)


def apply_alignment(
    image: NDArray[np.generic],
    transform: SimilarityTransform,
    output_shape: tuple[int, int] | None = None,
) -> FloatArray:
    """
    Resamples `image` so that input point p lands on transform(p).

    Bilinear interpolation, out-of-bounds source pixels fill with 0. Colour images keep their
    channels. Integer images are scaled to [0, 1] first.
    """
    pixels = np.asarray(image)
    if pixels.size == 0 or pixels.ndim not in (2, 3):
        raise ShapeMismatchError("apply_alignment", "non-empty (H, W) or (H, W, C)", pixels.shape)
    if transform.scale <= 0:
        msg = f"scale must be positive, got {transform.scale}"
        raise DegenerateGeometryError(msg)
    if np.issubdtype(pixels.dtype, np.integer):
        pixels = pixels / float(np.iinfo(pixels.dtype).max)
    pixels = pixels.astype(np.float64)
    shape = output_shape or (pixels.shape[0], pixels.shape[1])
    # warp wants the output -> input map
    inverse = sktransform.SimilarityTransform(matrix=transform.inverse().params())
    return sktransform.warp(
        pixels,
        inverse,
        output_shape=shape,
        order=1,
        mode="constant",
        cval=0.0,
        preserve_range=True,
    )
