from gestalt.evaluation.composite import composite_photo, save_composite
from gestalt.evaluation.metrics import (
    BinaryMetrics,
    binary_metrics,
    confusion_matrix,
    error_rate_reduction,
    topk_accuracies,
    topk_accuracy,
    topk_hits,
)
from gestalt.evaluation.permutation import (
    PermutationResult,
    expected_permuted_accuracy,
    exhaustive_permutation_accuracies,
    permutation_test,
)
from gestalt.evaluation.report import (
    AGGREGATED_ROW,
    ConfusionReport,
    EvalReport,
    ExclusionRecord,
    RegionRow,
    TopKResult,
    format_region_table,
    read_report,
    write_report,
)

__all__ = [
    "AGGREGATED_ROW",
    "BinaryMetrics",
    "ConfusionReport",
    "EvalReport",
    "ExclusionRecord",
    "PermutationResult",
    "RegionRow",
    "TopKResult",
    "binary_metrics",
    "composite_photo",
    "confusion_matrix",
    "error_rate_reduction",
    "exhaustive_permutation_accuracies",
    "expected_permuted_accuracy",
    "format_region_table",
    "permutation_test",
    "read_report",
    "save_composite",
    "topk_accuracies",
    "topk_accuracy",
    "topk_hits",
    "write_report",
]
