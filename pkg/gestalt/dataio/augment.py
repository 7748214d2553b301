"""
Training-time augmentation of region crops.

Parameters are sampled the way Keras' ImageDataGenerator samples them: uniform within symmetric
ranges, zoom range z means independent x/y scale factors in [1 - z, 1 + z], shifts are fractions
of the crop side, and horizontal flips happen with probability 0.5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from skimage import transform as sktransform

from gestalt.preproc import RegionCrop, RegionTag


class AugmentationPolicy(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rotation_degrees: float = Field(default=5.0, ge=0.0)
    width_shift: float = Field(default=0.05, ge=0.0)
    height_shift: float = Field(default=0.05, ge=0.0)
    shear: float = Field(default=5 * math.pi / 180, ge=0.0)
    zoom: float = Field(default=0.05, ge=0.0, lt=1.0)
    horizontal_flip: bool = True
    seed: int = 0

    @classmethod
    def disabled(cls, seed: int = 0) -> AugmentationPolicy:
        return cls(
            rotation_degrees=0.0,
            width_shift=0.0,
            height_shift=0.0,
            shear=0.0,
            zoom=0.0,
            horizontal_flip=False,
            seed=seed,
        )


@dataclass(frozen=True)
class AugmentationParams:
    rotation: float  # radians
    shift_x: float  # fraction of side
    shift_y: float
    shear: float  # radians
    zoom_x: float
    zoom_y: float
    flip: bool

    @property
    def is_identity(self) -> bool:
        return (
            self.rotation == 0
            and self.shift_x == 0
            and self.shift_y == 0
            and self.shear == 0
            and self.zoom_x == 1
            and self.zoom_y == 1
            and not self.flip
        )

    def matrix(self, side: int) -> np.ndarray:
        """Output -> input pixel map in (x, y) homogeneous coordinates, about the crop centre."""
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        rotation = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        shear = np.array([[1.0, -math.sin(self.shear), 0.0], [0.0, math.cos(self.shear), 0.0], [0.0, 0.0, 1.0]])
        zoom = np.diag([self.zoom_x, self.zoom_y, 1.0])
        centre = (side - 1) / 2
        to_centre = np.array([[1.0, 0.0, -centre], [0.0, 1.0, -centre], [0.0, 0.0, 1.0]])
        from_centre = np.array(
            [
                [1.0, 0.0, centre + self.shift_x * side],
                [0.0, 1.0, centre + self.shift_y * side],
                [0.0, 0.0, 1.0],
            ]
        )
        return from_centre @ rotation @ shear @ zoom @ to_centre


def _symmetric(rng: np.random.Generator, bound: float) -> float:
    return float(rng.uniform(-bound, bound))


def sample_augmentation_params(policy: AugmentationPolicy, rng: np.random.Generator) -> AugmentationParams:
    """Draws one set of parameters. A fixed number of draws is consumed whatever the policy."""
    rotation = _symmetric(rng, math.radians(policy.rotation_degrees))
    shift_x = _symmetric(rng, policy.width_shift)
    shift_y = _symmetric(rng, policy.height_shift)
    shear = _symmetric(rng, policy.shear)
    zoom_x, zoom_y = (float(z) for z in rng.uniform(1 - policy.zoom, 1 + policy.zoom, size=2))
    flip = bool(rng.random() < 0.5) and policy.horizontal_flip
    return AugmentationParams(rotation, shift_x, shift_y, shear, zoom_x, zoom_y, flip)


def apply_augmentation(crop: RegionCrop, params: AugmentationParams) -> RegionCrop:
    if params.is_identity:
        return RegionCrop(crop.tag, crop.pixels.copy())
    warped = sktransform.warp(
        crop.pixels,
        sktransform.AffineTransform(matrix=params.matrix(crop.side)),
        output_shape=crop.pixels.shape,
        order=1,
        mode="edge",
        preserve_range=True,
    )
    if params.flip:
        warped = warped[:, ::-1]
    return RegionCrop(crop.tag, np.clip(warped, 0.0, 1.0))


def augment(crop: RegionCrop, policy: AugmentationPolicy, rng: np.random.Generator | None = None) -> RegionCrop:
    """
    Randomly transforms a crop. Shape, region and value range are preserved.

    Without an explicit generator the policy seed is used, so equal seed + input gives equal output.
    """
    rng = rng if rng is not None else np.random.default_rng(policy.seed)
    return apply_augmentation(crop, sample_augmentation_params(policy, rng))


def sample_rng(policy: AugmentationPolicy, epoch: int, index: int) -> np.random.Generator:
    """Generator for one sample in one epoch, independent of worker count and visiting order"""
    return np.random.default_rng([policy.seed, epoch, index])


def augment_batch(
    pixels: np.ndarray,
    tag: RegionTag,
    policy: AugmentationPolicy,
    epoch: int,
    indices: np.ndarray,
) -> np.ndarray:
    """Augments a stack of crops (N, side, side); `indices` are the samples' dataset positions."""
    out = np.empty_like(pixels)
    for i, (image, index) in enumerate(zip(pixels, indices, strict=True)):
        crop = RegionCrop(tag, image)
        out[i] = augment(crop, policy, sample_rng(policy, epoch, int(index))).pixels
    return out

