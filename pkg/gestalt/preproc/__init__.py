from gestalt.preproc.alignment import apply_alignment, estimate_alignment, to_grayscale
from gestalt.preproc.landmarks import (
    IBUG68,
    SYNTHETIC8,
    build_canonical_template,
    get_schema,
    load_annotations,
    load_template,
    save_template,
    write_annotations,
)
from gestalt.preproc.pipeline import PreprocessedSample, preprocess_sample
from gestalt.preproc.regions import DEFAULT_REGION_SPECS, generate_regions, region_box, region_specs
from gestalt.preproc.types import (
    ANCHOR_NAMES,
    LandmarkSchema,
    LandmarkSet,
    RegionCrop,
    RegionSpec,
    RegionTag,
    SimilarityTransform,
)

__all__ = [
    "ANCHOR_NAMES",
    "DEFAULT_REGION_SPECS",
    "IBUG68",
    "SYNTHETIC8",
    "LandmarkSchema",
    "LandmarkSet",
    "PreprocessedSample",
    "RegionCrop",
    "RegionSpec",
    "RegionTag",
    "SimilarityTransform",
    "apply_alignment",
    "build_canonical_template",
    "estimate_alignment",
    "generate_regions",
    "get_schema",
    "load_annotations",
    "load_template",
    "preprocess_sample",
    "region_box",
    "region_specs",
    "save_template",
    "to_grayscale",
    "write_annotations",
]
