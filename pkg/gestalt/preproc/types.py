from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

from gestalt.errors import DegenerateGeometryError, ShapeMismatchError

FloatArray = NDArray[np.float64]

# Named anchors every schema has to resolve. An anchor is one index or a group of indices whose mean is used.
ANCHOR_NAMES = (
    "left_eye",
    "right_eye",
    "nose_tip",
    "mouth_center",
    "left_ear",
    "right_ear",
    "chin",
    "forehead",
)


class RegionTag(StrEnum):
    FULL_FACE = "FullFace"
    EYES = "Eyes"
    NOSE = "Nose"
    MIDDLE_FACE = "MiddleFace"
    UPPER_HALF = "UpperHalf"
    LOWER_HALF = "LowerHalf"


@dataclass(frozen=True)
class LandmarkSchema:
    """
    Describes a landmark layout.

    attributes:
        name: registry name, written into annotation records
        size: number of points
        anchors: named anchor -> indices; the anchor position is the mean of its points
    """

    name: str
    size: int
    anchors: dict[str, tuple[int, ...]]

    def __post_init__(self):
        if self.size < 2:
            raise DegenerateGeometryError(f"schema {self.name} needs at least 2 points, has {self.size}")
        missing = [name for name in ANCHOR_NAMES if name not in self.anchors]
        if missing:
            msg = f"schema {self.name} is missing anchors {missing}"
            raise ValueError(msg)
        for name, indices in self.anchors.items():
            if not indices or any(not 0 <= i < self.size for i in indices):
                msg = f"schema {self.name}: anchor {name} has indices {indices} outside 0..{self.size - 1}"
                raise ValueError(msg)


@dataclass(frozen=True)
class LandmarkSet:
    """2D landmark coordinates (x, y in pixels) laid out according to a schema."""

    points: FloatArray
    schema: LandmarkSchema

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.shape != (self.schema.size, 2):
            raise ShapeMismatchError("LandmarkSet", (self.schema.size, 2), points.shape)
        if not np.all(np.isfinite(points)):
            raise DegenerateGeometryError("landmark coordinates must be finite")
        object.__setattr__(self, "points", points)

    @property
    def schema_size(self) -> int:
        return self.schema.size

    def anchor(self, name: str) -> FloatArray:
        return self.points[list(self.schema.anchors[name])].mean(axis=0)

    def anchor_points(self, names: tuple[str, ...]) -> FloatArray:
        return np.stack([self.anchor(name) for name in names])

    def transformed(self, transform: SimilarityTransform) -> LandmarkSet:
        return LandmarkSet(transform.apply(self.points), self.schema)

    def clamped(self, width: int, height: int) -> LandmarkSet:
        clamped = np.column_stack(
            (np.clip(self.points[:, 0], 0, width - 1), np.clip(self.points[:, 1], 0, height - 1))
        )
        return LandmarkSet(clamped, self.schema)

    def flattened(self) -> list[float]:
        return [float(v) for v in self.points.reshape(-1)]


@dataclass(frozen=True)
class SimilarityTransform:
    """
    Proper similarity transform (no reflection): p' = scale * R(rotation) @ p + translation.

    The matrix convention matches skimage.transform.SimilarityTransform, so params() can be handed
    straight to skimage warps.
    """

    scale: float = 1.0
    rotation: float = 0.0
    translation: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise DegenerateGeometryError(f"similarity scale must be positive, got {self.scale}")

    @classmethod
    def identity(cls) -> SimilarityTransform:
        return cls()

    @classmethod
    def from_matrix(cls, matrix: FloatArray) -> SimilarityTransform:
        a, b = float(matrix[0, 0]), float(matrix[1, 0])
        return cls(
            scale=math.hypot(a, b),
            rotation=math.atan2(b, a),
            translation=(float(matrix[0, 2]), float(matrix[1, 2])),
        )

    def params(self) -> FloatArray:
        c = self.scale * math.cos(self.rotation)
        s = self.scale * math.sin(self.rotation)
        tx, ty = self.translation
        return np.array([[c, -s, tx], [s, c, ty], [0.0, 0.0, 1.0]])

    def apply(self, points: FloatArray) -> FloatArray:
        matrix = self.params()
        return points @ matrix[:2, :2].T + matrix[:2, 2]

    def inverse(self) -> SimilarityTransform:
        inv_scale = 1.0 / self.scale
        c, s = math.cos(-self.rotation), math.sin(-self.rotation)
        tx, ty = self.translation
        return SimilarityTransform(
            scale=inv_scale,
            rotation=-self.rotation,
            translation=(-inv_scale * (c * tx - s * ty), -inv_scale * (s * tx + c * ty)),
        )

    def then(self, other: SimilarityTransform) -> SimilarityTransform:
        """Transform that applies self first, then other."""
        return SimilarityTransform.from_matrix(other.params() @ self.params())


class RegionSpec(BaseModel):
    """
    Landmark-anchored crop rule.

    The box is the axis-aligned bounding box of the anchors, grown on each side by the margin
    fraction times the inter-ocular distance. `half` cuts the box at the midpoint between the eye
    line and the mouth line.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    tag: RegionTag
    anchors: tuple[str, ...]
    margin_left: float = Field(default=0.0, ge=0.0)
    margin_right: float = Field(default=0.0, ge=0.0)
    margin_top: float = Field(default=0.0, ge=0.0)
    margin_bottom: float = Field(default=0.0, ge=0.0)
    half: Literal["upper", "lower"] | None = None
    side: int = Field(default=100, gt=0)


@dataclass(frozen=True)
class RegionCrop:
    """One aligned grayscale region image, side x side, values in [0, 1]."""

    tag: RegionTag
    pixels: FloatArray = field(repr=False)

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2 or pixels.shape[0] != pixels.shape[1]:
            raise ShapeMismatchError("RegionCrop", "(side, side)", pixels.shape)
        object.__setattr__(self, "pixels", pixels)

    @property
    def side(self) -> int:
        return self.pixels.shape[0]
