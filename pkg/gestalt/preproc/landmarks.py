"""
Landmark schemas, the annotation record format, and the canonical template.

Annotation records are line-delimited, UTF-8, tab-separated:

    <image path> \t <schema name> \t <x0> <y0> <x1> <y1> ...

Lines that are empty or start with `#` are ignored. The canonical template is stored as a single
record of the same format whose image path is the literal `<template>`.
"""

from __future__ import annotations

from collections.abc import Iterable
from pathlib import Path

import numpy as np
from loguru import logger

from gestalt.errors import DegenerateGeometryError, MissingPathError, ParseError
from gestalt.preproc.alignment import estimate_alignment
from gestalt.preproc.types import ANCHOR_NAMES, LandmarkSchema, LandmarkSet

TEMPLATE_KEY = "<template>"

# iBUG 300-W 68 point layout, 0-based. "left" is the image left in a frontal view.
IBUG68 = LandmarkSchema(
    name="ibug68",
    size=68,
    anchors={
        "left_eye": (36, 37, 38, 39, 40, 41),
        "right_eye": (42, 43, 44, 45, 46, 47),
        "nose_tip": (30,),
        "mouth_center": (48, 51, 54, 57),
        "left_ear": (0,),
        "right_ear": (16,),
        "chin": (8,),
        "forehead": (19, 24),
    },
)

# One point per anchor, in ANCHOR_NAMES order. Used by the synthetic generator.
SYNTHETIC8 = LandmarkSchema(
    name="synthetic8",
    size=len(ANCHOR_NAMES),
    anchors={name: (i,) for i, name in enumerate(ANCHOR_NAMES)},
)

# Frontal layout of SYNTHETIC8 on a 100 x 100 frame.
SYNTHETIC8_FRONTAL = np.array(
    [
        [35.0, 40.0],  # left_eye
        [65.0, 40.0],  # right_eye
        [50.0, 57.0],  # nose_tip
        [50.0, 72.0],  # mouth_center
        [15.0, 50.0],  # left_ear
        [85.0, 50.0],  # right_ear
        [50.0, 92.0],  # chin
        [50.0, 14.0],  # forehead
    ]
)

SCHEMA_REGISTRY: dict[str, LandmarkSchema] = {}


def register_schema(schema: LandmarkSchema) -> LandmarkSchema:
    """Adds a schema to the registry so annotation files can refer to it by name"""
    SCHEMA_REGISTRY[schema.name] = schema
    return schema


register_schema(IBUG68)
register_schema(SYNTHETIC8)


def get_schema(name: str) -> LandmarkSchema:
    try:
        return SCHEMA_REGISTRY[name]
    except KeyError:
        msg = f"unknown landmark schema {name!r}, known: {sorted(SCHEMA_REGISTRY)}"
        raise KeyError(msg) from None


def parse_annotation_line(line: str, path: Path | str = "<string>", line_number: int = 0) -> tuple[str, LandmarkSet]:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 3:
        raise ParseError(path, line_number, f"expected 3 tab-separated fields, got {len(fields)}")
    image_path, schema_name, coordinates = fields
    try:
        schema = get_schema(schema_name)
    except KeyError as e:
        raise ParseError(path, line_number, str(e)) from None
    try:
        values = [float(v) for v in coordinates.split()]
    except ValueError:
        raise ParseError(path, line_number, "coordinates must be numbers") from None
    if len(values) != 2 * schema.size:
        raise ParseError(path, line_number, f"schema {schema.name} needs {2 * schema.size} values, got {len(values)}")
    try:
        landmarks = LandmarkSet(np.array(values).reshape(-1, 2), schema)
    except DegenerateGeometryError as e:
        raise ParseError(path, line_number, str(e)) from None
    return image_path, landmarks


def format_annotation_line(image_path: str, landmarks: LandmarkSet) -> str:
    # repr() round-trips floats exactly
    coordinates = " ".join(repr(v) for v in landmarks.flattened())
    return f"{image_path}\t{landmarks.schema.name}\t{coordinates}\n"


def load_annotations(path: Path) -> dict[str, LandmarkSet]:
    """Reads an annotation file into a mapping of image path -> landmarks"""
    if not path.exists():
        raise MissingPathError(path, "annotation file")
    records: dict[str, LandmarkSet] = {}
    with path.open(encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            image_path, landmarks = parse_annotation_line(line, path, line_number)
            records[image_path] = landmarks
    return records


def write_annotations(path: Path, records: Iterable[tuple[str, LandmarkSet]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        f.writelines(format_annotation_line(image_path, landmarks) for image_path, landmarks in records)


def load_template(path: Path) -> LandmarkSet:
    records = load_annotations(path)
    if TEMPLATE_KEY not in records:
        raise ParseError(path, 0, f"no {TEMPLATE_KEY} record")
    return records[TEMPLATE_KEY]


def save_template(path: Path, template: LandmarkSet) -> None:
    write_annotations(path, [(TEMPLATE_KEY, template)])


def _normalized(points: np.ndarray) -> np.ndarray:
    centred = points - points.mean(axis=0)
    norm = np.sqrt((centred**2).sum())
    if norm == 0:
        msg = "all landmarks coincide"
        raise DegenerateGeometryError(msg)
    return centred / norm


def build_canonical_template(
    landmark_sets: list[LandmarkSet],
    canvas_side: int,
    iod_fraction: float = 0.3,
    iterations: int = 20,
    tolerance: float = 1e-10,
) -> LandmarkSet:
    """
    Generalized Procrustes mean of a set of landmark sets, placed on an alignment canvas.

    The mean shape is rescaled so the inter-ocular distance is `iod_fraction * canvas_side` and
    translated so its bounding box is centred on the canvas.
    """
    if not landmark_sets:
        msg = "cannot build a template from zero landmark sets"
        raise DegenerateGeometryError(msg)
    schema = landmark_sets[0].schema
    mean = _normalized(landmark_sets[0].points)
    for iteration in range(iterations):
        reference = LandmarkSet(mean, schema)
        aligned = [
            estimate_alignment(landmarks, reference).apply(landmarks.points) for landmarks in landmark_sets
        ]
        new_mean = _normalized(np.mean(aligned, axis=0))
        # keep the orientation of the reference so the mean does not drift in rotation
        new_mean = estimate_alignment(LandmarkSet(new_mean, schema), reference).apply(new_mean)
        new_mean = _normalized(new_mean)
        change = float(np.abs(new_mean - mean).max())
        mean = new_mean
        if change < tolerance:
            logger.debug(f"Procrustes template converged after {iteration + 1} iterations")
            break

    shape = LandmarkSet(mean, schema)
    eye_vector = shape.anchor("right_eye") - shape.anchor("left_eye")
    iod = float(np.hypot(*eye_vector))
    if iod == 0:
        msg = "eye anchors coincide in the mean shape"
        raise DegenerateGeometryError(msg)
    # level the eye line
    angle = float(np.arctan2(eye_vector[1], eye_vector[0]))
    c, s = np.cos(-angle), np.sin(-angle)
    points = mean @ np.array([[c, -s], [s, c]]).T
    points *= iod_fraction * canvas_side / iod
    centre = (points.min(axis=0) + points.max(axis=0)) / 2
    points += canvas_side / 2 - centre
    return LandmarkSet(points, schema)
