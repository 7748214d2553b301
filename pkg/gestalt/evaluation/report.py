"""
The evaluation report written to `report.json`.

The report is pydantic-validated on construction, so an inconsistent report (accuracies outside
[0, 1] or decreasing in K, confusion rows that do not match the class support, p-values outside
[0, 1]) can never be written.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Self

from pydantic import BaseModel, Field, model_validator

from gestalt.dataio import CohortStatistics
from gestalt.evaluation.metrics import BinaryMetrics
from gestalt.evaluation.permutation import PermutationResult

REPORT_SCHEMA_VERSION = 1
AGGREGATED_ROW = "Aggregated"


class TopKResult(BaseModel):
    k: int = Field(ge=1)
    accuracy: float = Field(ge=0.0, le=1.0)
    permutation: PermutationResult | None = None


class ConfusionReport(BaseModel):
    labels: list[str]
    matrix: list[list[int]]
    support: list[int]

    @model_validator(mode="after")
    def rows_match_support(self) -> Self:
        if len(self.matrix) != len(self.labels) or any(len(row) != len(self.labels) for row in self.matrix):
            msg = "confusion matrix must be square over the label list"
            raise ValueError(msg)
        if [sum(row) for row in self.matrix] != self.support:
            msg = "confusion matrix rows must sum to the class support"
            raise ValueError(msg)
        return self

    @property
    def trace(self) -> int:
        return sum(self.matrix[i][i] for i in range(len(self.labels)))


class RegionRow(BaseModel):
    """One row of the per-region table: a region expert or the aggregated model"""

    region: str
    accuracies: dict[int, float]


class ExclusionRecord(BaseModel):
    sample_id: str
    reason: str


class EvalReport(BaseModel):
    schema_version: int = REPORT_SCHEMA_VERSION
    kind: str
    name: str
    seed: int
    code_version: str
    samples: int = Field(ge=0)
    classes: int = Field(ge=0)
    labels: list[str] = []
    topk: list[TopKResult] = []
    confusion: ConfusionReport | None = None
    binary: BinaryMetrics | None = None
    regions: list[RegionRow] = []
    exclusions: list[ExclusionRecord] = []
    cohorts: dict[str, CohortStatistics] = {}
    composites: list[str] = []
    notes: dict[str, Any] = {}
    config: dict[str, Any] = {}

    @model_validator(mode="after")
    def check_consistency(self) -> Self:
        ks = [result.k for result in self.topk]
        if ks != sorted(set(ks)):
            msg = f"top-K results must be sorted by unique K, got {ks}"
            raise ValueError(msg)
        accuracies = [result.accuracy for result in self.topk]
        if any(a > b for a, b in zip(accuracies, accuracies[1:], strict=False)):
            msg = f"top-K accuracy must not decrease with K, got {accuracies}"
            raise ValueError(msg)
        for result in self.topk:
            if result.permutation is not None and not 0 <= result.permutation.p_value <= 1:
                msg = f"p-value out of range for K={result.k}"
                raise ValueError(msg)
        for row in self.regions:
            if any(not 0 <= value <= 1 for value in row.accuracies.values()):
                msg = f"region {row.region} accuracy out of range"
                raise ValueError(msg)
        if self.confusion is not None and sum(self.confusion.support) != self.samples:
            msg = "confusion matrix total must equal the sample count"
            raise ValueError(msg)
        return self

    def accuracy(self, k: int) -> float:
        for result in self.topk:
            if result.k == k:
                return result.accuracy
        raise KeyError(k)

    def region_row(self, region: str) -> RegionRow:
        for row in self.regions:
            if row.region == region:
                return row
        raise KeyError(region)


def write_report(path: Path, report: EvalReport) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")


def read_report(path: Path) -> EvalReport:
    return EvalReport.model_validate_json(path.read_text(encoding="utf-8"))


def format_region_table(rows: list[RegionRow], k: int = 5) -> str:
    """Plain-text table of top-k accuracy per region, aggregated row last"""
    width = max([len(row.region) for row in rows] + [len(AGGREGATED_ROW), 6])
    lines = [f"{'Region':<{width}}  top-{k}", f"{'-' * width}  -----"]
    lines.extend(f"{row.region:<{width}}  {100 * row.accuracies.get(k, float('nan')):6.2f}" for row in rows)
    return "\n".join(lines)
