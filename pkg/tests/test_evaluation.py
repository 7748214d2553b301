from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError
from skimage import io as skio

from gestalt.ensemble import RankedList
from gestalt.errors import EmptyCohortError, InvariantViolation, LengthMismatchError, ShapeMismatchError
from gestalt.evaluation import (
    AGGREGATED_ROW,
    BinaryMetrics,
    ConfusionReport,
    EvalReport,
    RegionRow,
    TopKResult,
    binary_metrics,
    composite_photo,
    confusion_matrix,
    error_rate_reduction,
    exhaustive_permutation_accuracies,
    expected_permuted_accuracy,
    format_region_table,
    permutation_test,
    read_report,
    save_composite,
    topk_accuracies,
    topk_accuracy,
    topk_hits,
    write_report,
)
from gestalt.evaluation import reference
from gestalt.evaluation.plots import plot_confusion, plot_regions, plot_topk


def ranked(*labels: str) -> RankedList:
    """Ranked list with strictly decreasing scores in the given order"""
    weights = np.arange(len(labels), 0, -1, dtype=float)
    weights /= weights.sum()
    return RankedList(tuple(zip(labels, (float(w) for w in weights), strict=True)))


SMALL_LISTS = [ranked("a", "b", "c"), ranked("b", "a", "c"), ranked("b", "c", "a"), ranked("c", "a", "b")]
SMALL_LABELS = ["a", "a", "b", "c"]


# top-K
def test_topk_hits_and_accuracy():
    assert topk_hits(SMALL_LISTS, SMALL_LABELS, 1).tolist() == [True, False, True, True]
    assert topk_accuracy(SMALL_LISTS, SMALL_LABELS, 1) == 0.75
    assert topk_accuracy(SMALL_LISTS, SMALL_LABELS, 2) == 1.0
    assert topk_accuracies(SMALL_LISTS, SMALL_LABELS, [3, 1, 2]) == {1: 0.75, 2: 1.0, 3: 1.0}


def test_topk_errors():
    with pytest.raises(LengthMismatchError):
        topk_hits(SMALL_LISTS, ["a"], 1)
    with pytest.raises(ValueError, match="k must be"):
        topk_hits(SMALL_LISTS, SMALL_LABELS, 0)


def test_topk_of_empty_test_set_is_zero():
    assert topk_accuracy([], [], 1) == 0.0


@given(st.lists(st.permutations(["a", "b", "c", "d", "e"]), min_size=1, max_size=10), st.data())
def test_topk_accuracy_never_decreases_with_k(orders: list[list[str]], data: st.DataObject):
    lists = [ranked(*order) for order in orders]
    labels = [data.draw(st.sampled_from(["a", "b", "c", "d", "e"])) for _ in orders]
    accuracies = topk_accuracies(lists, labels, [1, 2, 3, 4, 5])
    values = [accuracies[k] for k in (1, 2, 3, 4, 5)]
    assert values == sorted(values)
    assert values[-1] == 1.0


# confusion and binary metrics
def test_specialized_confusion_trace():
    genes = list(reference.SPECIALIZED_GENES)
    labels = [gene for gene in genes for _ in range(5)]
    # 4 + 3 + 3 + 3 + 3 right; a wrong call goes to the next gene
    correct = [4, 3, 3, 3, 3]
    predictions = [gene if i < correct[g] else genes[(g + 1) % 5] for g, gene in enumerate(genes) for i in range(5)]

    matrix = confusion_matrix(predictions, labels, genes)

    assert int(np.trace(matrix)) == reference.SPECIALIZED_CORRECT
    assert matrix.sum(axis=1).tolist() == [5] * 5
    assert int(np.trace(matrix)) / matrix.sum() == pytest.approx(0.64)
    assert reference.SPECIALIZED_CHANCE == 0.2
    report = ConfusionReport(labels=genes, matrix=matrix.tolist(), support=[5] * 5)
    assert report.trace == 16


def test_confusion_matrix_errors():
    with pytest.raises(LengthMismatchError):
        confusion_matrix(["a"], ["a", "b"], ["a", "b"])
    assert confusion_matrix([], [], ["a", "b"]).tolist() == [[0, 0], [0, 0]]


def test_angelman_counts():
    counts = reference.ANGELMAN_COUNTS
    metrics = BinaryMetrics.from_counts(counts["tp"], counts["fn"], counts["tn"], counts["fp"])
    assert metrics.accuracy == pytest.approx(0.92)
    assert metrics.sensitivity == pytest.approx(0.80)
    assert metrics.specificity == pytest.approx(1.00)


def test_binary_metrics_from_calls():
    actual = [True] * 10 + [False] * 15
    predicted = [True] * 8 + [False] * 2 + [False] * 15
    metrics = binary_metrics(predicted, actual)
    assert (metrics.true_positive, metrics.false_negative, metrics.true_negative, metrics.false_positive) == (8, 2, 15, 0)


def test_cdls_accuracy_rounds_to_two_decimals():
    assert round(100 * reference.CDLS_CORRECT / reference.CDLS_TOTAL, 2) == 96.88
    metrics = BinaryMetrics.from_counts(tp=16, fn=1, tn=15, fp=0)
    assert metrics.accuracy == reference.CDLS_ACCURACY


def test_binary_metrics_with_a_missing_cohort():
    with pytest.raises(EmptyCohortError):
        binary_metrics([True, False], [True, True])
    with pytest.raises(EmptyCohortError):
        binary_metrics([True, False], [False, False])
    metrics = binary_metrics([True, False], [True, True], require_both_cohorts=False)
    assert metrics.specificity is None
    assert metrics.sensitivity == 0.5


def test_error_rate_reduction():
    reduction = error_rate_reduction(reference.ANGELMAN_EXPERT_ACCURACY, 0.92)
    assert reduction >= reference.ANGELMAN_ERROR_RATE_REDUCTION_FLOOR
    assert error_rate_reduction(0.5, 0.5) == 0.0
    with pytest.raises(ValueError, match="below 1"):
        error_rate_reduction(1.0, 0.9)


# permutation test
def test_exhaustive_null_matches_the_analytic_mean():
    accuracies = exhaustive_permutation_accuracies(SMALL_LISTS, SMALL_LABELS, 1)
    assert len(accuracies) == 24
    # (n_a + n_b + n_b + n_c) / N^2
    assert accuracies.mean() == pytest.approx(5 / 16)
    assert expected_permuted_accuracy(SMALL_LISTS, SMALL_LABELS, 1) == pytest.approx(5 / 16)


def test_sampled_null_matches_the_exhaustive_null():
    exhaustive = exhaustive_permutation_accuracies(SMALL_LISTS, SMALL_LABELS, 1)

    result = permutation_test(SMALL_LISTS, SMALL_LABELS, 1, draws=20_000, seed=0, chunk=3_000)

    assert result.observed == 0.75
    assert result.mean == pytest.approx(exhaustive.mean(), abs=0.01)
    assert result.sd == pytest.approx(exhaustive.std(), abs=0.01)
    assert result.p_value == pytest.approx(np.mean(exhaustive >= 0.75), abs=0.01)
    assert 0 < result.p_value <= 1


@given(
    st.lists(st.permutations(["a", "b", "c", "d"]), min_size=1, max_size=5),
    st.integers(1, 4),
    st.data(),
)
def test_analytic_mean_equals_the_exhaustive_mean(orders: list[list[str]], k: int, data: st.DataObject):
    lists = [ranked(*order) for order in orders]
    labels = [data.draw(st.sampled_from(["a", "b", "c", "d", "x"])) for _ in orders]
    exhaustive = exhaustive_permutation_accuracies(lists, labels, k)
    assert expected_permuted_accuracy(lists, labels, k) == pytest.approx(float(exhaustive.mean()))


def test_permutation_p_value_is_never_zero():
    labels = [f"c{i}" for i in range(8)]
    lists = [ranked(label, *(other for other in labels if other != label)) for label in labels]
    result = permutation_test(lists, labels, 1, draws=1_000, seed=1)
    assert result.observed == 1.0
    assert result.p_value >= 1 / 1_001


def test_permutation_test_is_seeded():
    first = permutation_test(SMALL_LISTS, SMALL_LABELS, 1, draws=5_000, seed=7)
    second = permutation_test(SMALL_LISTS, SMALL_LABELS, 1, draws=5_000, seed=7)
    assert first == second


def test_permutation_test_edge_cases():
    assert permutation_test([], [], 1, draws=10).p_value == 1.0
    with pytest.raises(ValueError, match="draws"):
        permutation_test(SMALL_LISTS, SMALL_LABELS, 1, draws=0)
    with pytest.raises(ValueError, match="limited to"):
        exhaustive_permutation_accuracies([ranked("a")] * 9, ["a"] * 9, 1)


# report
def report(**overrides) -> EvalReport:
    fields = {
        "kind": "multiclass",
        "name": "test",
        "seed": 0,
        "code_version": "0.1.0",
        "samples": 4,
        "classes": 3,
        "labels": ["a", "b", "c"],
        "topk": [TopKResult(k=1, accuracy=0.75), TopKResult(k=2, accuracy=1.0)],
        "confusion": ConfusionReport(labels=["a", "b", "c"], matrix=[[1, 1, 0], [0, 1, 0], [0, 0, 1]], support=[2, 1, 1]),
        "regions": [RegionRow(region="Eyes", accuracies={1: 0.5}), RegionRow(region=AGGREGATED_ROW, accuracies={1: 0.75})],
    }
    return EvalReport(**{**fields, **overrides})


def test_report_round_trip(tmp_path: Path):
    original = report()
    write_report(tmp_path / "report.json", original)
    loaded = read_report(tmp_path / "report.json")
    assert loaded == original
    assert loaded.accuracy(2) == 1.0
    assert loaded.region_row(AGGREGATED_ROW).accuracies == {1: 0.75}
    with pytest.raises(KeyError):
        loaded.accuracy(5)


@pytest.mark.parametrize(
    "overrides",
    [
        {"topk": [TopKResult(k=1, accuracy=0.9), TopKResult(k=2, accuracy=0.8)]},
        {"topk": [TopKResult(k=2, accuracy=0.8), TopKResult(k=1, accuracy=0.9)]},
        {"samples": 5},
        {"regions": [RegionRow(region="Eyes", accuracies={1: 1.5})]},
    ],
)
def test_inconsistent_reports_are_rejected(overrides: dict):
    with pytest.raises(ValidationError):
        report(**overrides)


def test_confusion_report_rows_must_match_support():
    with pytest.raises(ValidationError):
        ConfusionReport(labels=["a", "b"], matrix=[[1, 0], [0, 1]], support=[2, 1])
    with pytest.raises(ValidationError):
        ConfusionReport(labels=["a", "b"], matrix=[[1, 0]], support=[1])


def test_region_table():
    table = format_region_table([RegionRow(region="Eyes", accuracies={5: 0.6036}), RegionRow(region=AGGREGATED_ROW, accuracies={5: 0.837})])
    lines = table.splitlines()
    assert lines[0].endswith("top-5")
    assert lines[2].split() == ["Eyes", "60.36"]
    assert lines[3].split() == [AGGREGATED_ROW, "83.70"]


def test_plots_are_written(tmp_path: Path):
    document = report()
    assert document.confusion is not None
    paths = [
        plot_confusion(document.confusion, tmp_path / "plots" / "confusion.png"),
        plot_topk(document, tmp_path / "plots" / "topk.png"),
        plot_regions(document.regions, 1, tmp_path / "plots" / "regions.png"),
    ]
    for path in paths:
        assert path.stat().st_size > 0


# composites
def test_composite_is_the_pixel_mean(tmp_path: Path):
    images = [np.zeros((4, 4)), np.ones((4, 4)), np.full((4, 4), 0.5)]
    composite = composite_photo(images)
    np.testing.assert_allclose(composite, 0.5)
    save_composite(tmp_path / "c.png", composite)
    assert skio.imread(tmp_path / "c.png").shape == (4, 4)


def test_composite_errors():
    with pytest.raises(EmptyCohortError):
        composite_photo([], "syndrome_00")
    with pytest.raises(ShapeMismatchError):
        composite_photo([np.zeros((4, 4)), np.zeros((5, 5))])


def test_monotone_membership_is_enforced():
    class Shuffled(RankedList):
        def top(self, k: int) -> list[str]:
            return self.labels[k - 1 : k]

    lists = [Shuffled(ranked("a", "b").entries)]
    with pytest.raises(InvariantViolation):
        topk_accuracies(lists, ["a"], [1, 2])
