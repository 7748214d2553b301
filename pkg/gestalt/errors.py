"""
Exception hierarchy for gestalt.

Every error carries the values that caused it as attributes and builds its own message.
The CLI maps the three top-level categories onto exit codes:

    UsageError         -> 2
    DataError          -> 3
    InvariantViolation -> 4
"""

from __future__ import annotations

from pathlib import Path
from typing import Any


class GestaltError(Exception):
    """Base class for all errors raised on purpose by gestalt."""

    exit_code: int = 4


class UsageError(GestaltError):
    exit_code = 2


class DataError(GestaltError):
    """Raised when inputs (files, datasets, tensors handed in by a caller) are unusable."""

    exit_code = 3


class InvariantViolation(GestaltError):
    """Raised by runtime assertions that should never fire on correct code."""

    exit_code = 4

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        self.detail = detail
        super().__init__(f"Invariant violated: {invariant}{f' ({detail})' if detail else ''}")


# data files
class MissingPathError(DataError):
    def __init__(self, path: Path, what: str = "file"):
        self.path = path
        super().__init__(f"{what} does not exist: {path}")


class ParseError(DataError):
    def __init__(self, path: Path | str, line: int, reason: str):
        self.path = path
        self.line = line
        self.reason = reason
        super().__init__(f"{path}:{line}: {reason}")


class ConfigError(DataError):
    def __init__(self, path: Path | str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"invalid config {path}: {reason}")


class DuplicateIdError(DataError):
    def __init__(self, sample_id: str, line: int | None = None):
        self.sample_id = sample_id
        self.line = line
        super().__init__(f"duplicate sample id {sample_id!r}{f' on line {line}' if line else ''}")


class UnknownLabelError(DataError):
    def __init__(self, label: str, declared: list[str]):
        self.label = label
        self.declared = declared
        super().__init__(f"label {label!r} is not in the declared class set {declared}")


class InsufficientClassesError(DataError):
    def __init__(self, found: int, required: int = 2):
        self.found = found
        self.required = required
        super().__init__(f"need at least {required} classes, found {found}")


class EmptyCohortError(DataError):
    def __init__(self, cohort: str):
        self.cohort = cohort
        super().__init__(f"cohort {cohort!r} has no samples")


class LengthMismatchError(DataError):
    def __init__(self, what: str, left: int, right: int):
        self.left = left
        self.right = right
        super().__init__(f"{what}: length mismatch ({left} != {right})")


# geometry and tensors
class DegenerateGeometryError(DataError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"degenerate geometry: {reason}")


class ShapeMismatchError(DataError):
    def __init__(self, op: str, expected: Any, got: Any):
        self.op = op
        self.expected = expected
        self.got = got
        super().__init__(f"{op}: expected shape {expected}, got {got}")


class DegenerateBatchError(DataError):
    def __init__(self, batch: int):
        self.batch = batch
        super().__init__(f"batch normalization in train mode needs a batch of at least 2, got {batch}")


class InvalidLabelError(DataError):
    def __init__(self, label: int, classes: int):
        self.label = label
        self.classes = classes
        super().__init__(f"label {label} out of range for {classes} classes")


# models and ensembles
class PhaseError(DataError):
    def __init__(self, expected: str, got: str):
        self.expected = expected
        self.got = got
        super().__init__(f"model is in phase {got!r}, expected {expected!r}")


class RegionMismatchError(DataError):
    def __init__(self, model_region: str, crop_region: str):
        self.model_region = model_region
        self.crop_region = crop_region
        super().__init__(f"crop region {crop_region} does not match model region {model_region}")


class LabelMismatchError(DataError):
    def __init__(self, expected: tuple[str, ...], got: tuple[str, ...]):
        self.expected = expected
        self.got = got
        super().__init__(f"label lists differ: {list(expected)} vs {list(got)}")


class EmptyEnsembleError(DataError):
    def __init__(self):
        super().__init__("cannot aggregate an empty list of region predictions")


class MissingLogitsError(DataError):
    def __init__(self, region: str):
        self.region = region
        super().__init__(f"logit averaging needs raw logits, {region} scores have none")


# worker pool
class JobFailedError(GestaltError):
    """A job failed inside a worker process; keeps the category of the original error."""

    def __init__(self, jobname: str, reason: str, exit_code: int = 4):
        self.jobname = jobname
        self.reason = reason
        self.exit_code = exit_code
        super().__init__(f"job {jobname} failed: {reason}")


class WorkerShutdownError(GestaltError):
    def __init__(self, worker_id: str, reason: str = "Unknown"):
        self.worker_id = worker_id
        self.reason = reason
        super().__init__(f"Worker {worker_id} failed to shut down cleanly: {reason}")
