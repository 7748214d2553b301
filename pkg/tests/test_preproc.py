import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gestalt.errors import DegenerateGeometryError, MissingPathError, ParseError, ShapeMismatchError
from gestalt.preproc import (
    DEFAULT_REGION_SPECS,
    IBUG68,
    SYNTHETIC8,
    LandmarkSet,
    RegionTag,
    SimilarityTransform,
    apply_alignment,
    build_canonical_template,
    estimate_alignment,
    generate_regions,
    load_annotations,
    load_template,
    preprocess_sample,
    region_box,
    region_specs,
    save_template,
    to_grayscale,
    write_annotations,
)
from gestalt.preproc.landmarks import SYNTHETIC8_FRONTAL
from gestalt.preproc.regions import extract_box

similarities = st.builds(
    SimilarityTransform,
    scale=st.floats(0.25, 4.0),
    rotation=st.floats(-3.1, 3.1),
    translation=st.tuples(st.floats(-200.0, 200.0), st.floats(-200.0, 200.0)),
)


@settings(max_examples=100)
@given(similarities)
def test_alignment_recovers_exact_similarity(transform: SimilarityTransform):
    frontal = LandmarkSet(SYNTHETIC8_FRONTAL, SYNTHETIC8)
    moved = frontal.transformed(transform)

    estimated = estimate_alignment(frontal, moved)

    np.testing.assert_allclose(estimated.params(), transform.params(), atol=1e-6)


@given(similarities)
def test_transform_then_inverse_is_identity(transform: SimilarityTransform):
    roundtrip = transform.then(transform.inverse())
    np.testing.assert_allclose(roundtrip.params(), np.eye(3), atol=1e-9)


def test_alignment_never_reflects(frontal: LandmarkSet):
    mirrored = LandmarkSet(frontal.points * np.array([-1.0, 1.0]), SYNTHETIC8)
    estimated = estimate_alignment(frontal, mirrored)
    assert estimated.scale > 0
    assert np.linalg.det(estimated.params()[:2, :2]) > 0


def test_alignment_rejects_coinciding_landmarks(frontal: LandmarkSet):
    collapsed = LandmarkSet(np.full((SYNTHETIC8.size, 2), 7.0), SYNTHETIC8)
    with pytest.raises(DegenerateGeometryError):
        estimate_alignment(collapsed, frontal)


def test_alignment_rejects_schema_mismatch(frontal: LandmarkSet):
    other = LandmarkSet(np.arange(136, dtype=float).reshape(68, 2), IBUG68)
    with pytest.raises(ShapeMismatchError):
        estimate_alignment(other, frontal)


def test_landmark_set_checks_shape():
    with pytest.raises(ShapeMismatchError):
        LandmarkSet(np.zeros((3, 2)), SYNTHETIC8)


def test_apply_alignment_moves_pixels_with_the_transform():
    image = np.zeros((50, 50))
    image[20, 10] = 1.0

    aligned = apply_alignment(image, SimilarityTransform(translation=(5.0, 3.0)))

    assert aligned[23, 15] == pytest.approx(1.0)
    assert aligned.sum() == pytest.approx(1.0)


def test_apply_alignment_fills_outside_with_zero():
    image = np.ones((20, 20))
    aligned = apply_alignment(image, SimilarityTransform(translation=(10.0, 0.0)))
    assert np.all(aligned[:, :9] == 0.0)
    assert np.all(aligned[:, 11:] == pytest.approx(1.0))


def test_rotating_there_and_back_keeps_the_interior(rng: np.random.Generator):
    side = 64
    rows, cols = np.mgrid[0:side, 0:side] / side
    phases = rng.uniform(0, 2 * np.pi, size=3)
    image = 0.5 + 0.15 * np.sin(2 * np.pi * cols + phases[0]) * np.cos(2 * np.pi * rows + phases[1])
    image += 0.1 * np.sin(2 * np.pi * (cols + rows) + phases[2])
    centre = (side - 1) / 2
    rotate = (
        SimilarityTransform(translation=(-centre, -centre))
        .then(SimilarityTransform(rotation=0.2))
        .then(SimilarityTransform(translation=(centre, centre)))
    )

    restored = apply_alignment(apply_alignment(image, rotate), rotate.inverse())

    interior = slice(side // 4, 3 * side // 4)
    assert np.abs(restored[interior, interior] - image[interior, interior]).max() < 0.02


def test_apply_alignment_rejects_empty_image():
    with pytest.raises(ShapeMismatchError):
        apply_alignment(np.zeros((0, 0)), SimilarityTransform())


def test_grayscale_of_white_rgb_is_one():
    white = np.full((4, 4, 3), 255, dtype=np.uint8)
    assert np.allclose(to_grayscale(white), 1.0)


def test_template_is_levelled_scaled_and_centred(frontal: LandmarkSet):
    poses = [
        SimilarityTransform(1.0, 0.0, (0.0, 0.0)),
        SimilarityTransform(1.7, 0.3, (12.0, -4.0)),
        SimilarityTransform(0.6, -0.5, (-30.0, 25.0)),
    ]
    sets = [frontal.transformed(pose) for pose in poses]

    template = build_canonical_template(sets, canvas_side=64, iod_fraction=0.3)

    left, right = template.anchor("left_eye"), template.anchor("right_eye")
    assert right[0] > left[0]
    assert left[1] == pytest.approx(right[1], abs=1e-9)
    assert right[0] - left[0] == pytest.approx(0.3 * 64)
    centre = (template.points.min(axis=0) + template.points.max(axis=0)) / 2
    np.testing.assert_allclose(centre, [32.0, 32.0], atol=1e-9)
    # every input is a similar copy of the frontal shape, so the mean shape is that shape
    fitted = estimate_alignment(frontal, template).apply(frontal.points)
    np.testing.assert_allclose(fitted, template.points, atol=1e-6)


def test_template_needs_landmarks():
    with pytest.raises(DegenerateGeometryError):
        build_canonical_template([], canvas_side=64)


def test_eyes_box_on_frontal_layout(frontal: LandmarkSet):
    box = region_box(frontal, DEFAULT_REGION_SPECS[RegionTag.EYES])
    # inter-ocular distance 30, margins 0.4 / 0.3
    assert box == pytest.approx((23.0, 31.0, 77.0, 49.0))


def test_half_boxes_meet_between_eyes_and_mouth(frontal: LandmarkSet):
    upper = region_box(frontal, DEFAULT_REGION_SPECS[RegionTag.UPPER_HALF])
    lower = region_box(frontal, DEFAULT_REGION_SPECS[RegionTag.LOWER_HALF])
    assert upper[3] == pytest.approx(56.0)
    assert lower[1] == pytest.approx(56.0)


def test_coinciding_eyes_give_degenerate_eye_box(frontal: LandmarkSet):
    points = frontal.points.copy()
    points[0] = points[1] = (50.0, 40.0)
    with pytest.raises(DegenerateGeometryError):
        region_box(LandmarkSet(points, SYNTHETIC8), DEFAULT_REGION_SPECS[RegionTag.EYES])


def test_region_overrides_apply_to_one_region():
    specs = {spec.tag: spec for spec in region_specs(side=48, overrides={"Eyes": {"margin_top": 0.35}})}
    assert specs[RegionTag.EYES].margin_top == 0.35
    assert specs[RegionTag.NOSE].margin_top == DEFAULT_REGION_SPECS[RegionTag.NOSE].margin_top
    assert all(spec.side == 48 for spec in specs.values())
    assert list(specs) == list(RegionTag)


def test_extract_box_of_whole_image_is_the_image(rng: np.random.Generator):
    image = rng.random((40, 40))
    crop = extract_box(image, (0.0, 0.0, 40.0, 40.0), 40)
    np.testing.assert_allclose(crop, image, atol=1e-12)


def test_generate_regions_gives_one_crop_per_spec(rng: np.random.Generator, frontal: LandmarkSet):
    specs = region_specs(side=40)
    crops = generate_regions(rng.random((100, 100)), frontal, specs)

    assert [crop.tag for crop in crops] == list(RegionTag)
    for crop in crops:
        assert crop.pixels.shape == (40, 40)
        assert crop.pixels.min() >= 0.0
        assert crop.pixels.max() <= 1.0


def test_preprocess_identity_pose_keeps_the_image(rng: np.random.Generator, frontal: LandmarkSet):
    image = rng.random((100, 100))
    sample = preprocess_sample(image, frontal, frontal, region_specs([RegionTag.FULL_FACE], side=32), 100)

    np.testing.assert_allclose(sample.transform.params(), np.eye(3), atol=1e-9)
    np.testing.assert_allclose(sample.aligned, image, atol=1e-6)
    assert sample.missing_regions == []


def test_preprocess_drops_only_the_degenerate_region(rng: np.random.Generator, frontal: LandmarkSet):
    points = frontal.points.copy()
    points[0] = points[1] = (50.0, 40.0)
    specs = region_specs([RegionTag.FULL_FACE, RegionTag.EYES], side=32)

    sample = preprocess_sample(rng.random((100, 100)), LandmarkSet(points, SYNTHETIC8), frontal, specs, 100, "s1")

    assert sample.missing_regions == [RegionTag.EYES]
    full_face = sample.crops[RegionTag.FULL_FACE]
    assert full_face is not None
    assert full_face.side == 32


def test_annotations_round_trip_exactly(tmp_path: Path, rng: np.random.Generator):
    landmarks = LandmarkSet(rng.random((8, 2)) * 100, SYNTHETIC8)
    path = tmp_path / "landmarks.tsv"

    write_annotations(path, [("faces/a.png", landmarks)])
    loaded = load_annotations(path)

    assert list(loaded) == ["faces/a.png"]
    assert np.array_equal(loaded["faces/a.png"].points, landmarks.points)


def test_template_file_round_trip(tmp_path: Path, frontal: LandmarkSet):
    path = tmp_path / "template.tsv"
    save_template(path, frontal)
    assert np.array_equal(load_template(path).points, frontal.points)


@pytest.mark.parametrize(
    ("line", "reason"),
    [
        ("a.png\tsynthetic8", "expected 3 tab-separated fields"),
        ("a.png\tnope\t1 2", "unknown landmark schema"),
        ("a.png\tsynthetic8\t1 2 3", "needs 16 values"),
        ("a.png\tsynthetic8\t" + " ".join(["x"] * 16), "coordinates must be numbers"),
    ],
)
def test_bad_annotation_lines_name_file_and_line(tmp_path: Path, line: str, reason: str):
    path = tmp_path / "bad.tsv"
    path.write_text(f"# header\n{line}\n", encoding="utf-8")
    with pytest.raises(ParseError) as excinfo:
        load_annotations(path)
    assert excinfo.value.line == 2
    assert reason in str(excinfo.value)
    assert str(path) in str(excinfo.value)


def test_missing_annotation_file(tmp_path: Path):
    with pytest.raises(MissingPathError):
        load_annotations(tmp_path / "absent.tsv")


def test_template_file_without_template_record(tmp_path: Path, frontal: LandmarkSet):
    path = tmp_path / "template.tsv"
    write_annotations(path, [("a.png", frontal)])
    with pytest.raises(ParseError):
        load_template(path)


def test_similarity_rejects_non_positive_scale():
    with pytest.raises(DegenerateGeometryError):
        SimilarityTransform(scale=0.0)
    with pytest.raises(DegenerateGeometryError):
        SimilarityTransform(scale=math.nan)
