"""
Dataset manifests.

A manifest is a UTF-8, line-delimited, tab-separated file. Column order:

    id \t image path \t landmark file path \t label [\t cohort [\t split]]

Paths are relative to the manifest's directory. `cohort` and `split` may be left empty or set
to `-`. `split` is one of train / val / test. A header line `#classes: a,b,c` declares the class
set; labels outside it are rejected. Without the header the class set is inferred (sorted).
Other lines starting with `#` are comments.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, ValidationError

from gestalt.errors import DuplicateIdError, MissingPathError, ParseError, UnknownLabelError

CLASSES_HEADER = "#classes:"
EMPTY_FIELD = "-"

Split = Literal["train", "val", "test"]


class SampleRecord(BaseModel):
    """One manifest line"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str
    image_path: str
    landmark_path: str
    label: str
    cohort: str | None = None
    split: Split | None = None


@dataclass(frozen=True)
class Dataset:
    """
    Immutable, validated collection of sample records.

    attributes:
        records: samples in manifest order
        classes: class set, in declared order or sorted when inferred
        root: directory relative paths resolve against
    """

    records: tuple[SampleRecord, ...] = ()
    classes: tuple[str, ...] = ()
    root: Path = field(default=Path(), compare=False)

    def __post_init__(self):
        seen: set[str] = set()
        for record in self.records:
            if record.id in seen:
                raise DuplicateIdError(record.id)
            seen.add(record.id)
            if record.label not in self.classes:
                raise UnknownLabelError(record.label, list(self.classes))

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> list[str]:
        return [record.id for record in self.records]

    @property
    def labels(self) -> list[str]:
        return [record.label for record in self.records]

    def class_counts(self) -> dict[str, int]:
        counts = Counter(self.labels)
        return {label: counts.get(label, 0) for label in self.classes}

    def label_index(self, label: str) -> int:
        return self.classes.index(label)

    def image_path(self, record: SampleRecord) -> Path:
        return self.root / record.image_path

    def landmark_path(self, record: SampleRecord) -> Path:
        return self.root / record.landmark_path

    def with_records(self, records: Iterable[SampleRecord]) -> Dataset:
        return Dataset(tuple(records), self.classes, self.root)

    def with_classes(self, classes: Iterable[str]) -> Dataset:
        """Restricts the dataset to a class subset, keeping the given class order"""
        keep = tuple(classes)
        return Dataset(tuple(r for r in self.records if r.label in keep), keep, self.root)


def _optional(value: str) -> str | None:
    value = value.strip()
    return None if value in ("", EMPTY_FIELD) else value


def parse_manifest_lines(lines: Iterable[str], path: Path | str, root: Path) -> Dataset:
    declared: tuple[str, ...] | None = None
    records: list[SampleRecord] = []
    seen: set[str] = set()
    for line_number, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if line.startswith(CLASSES_HEADER):
            declared = tuple(c.strip() for c in line[len(CLASSES_HEADER) :].split(",") if c.strip())
            continue
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if not 4 <= len(fields) <= 6:
            raise ParseError(path, line_number, f"expected 4 to 6 tab-separated fields, got {len(fields)}")
        fields += [""] * (6 - len(fields))
        sample_id, image_path, landmark_path, label, cohort, split = (f.strip() for f in fields)
        if not sample_id or not image_path or not label:
            raise ParseError(path, line_number, "id, image path and label must not be empty")
        if sample_id in seen:
            raise DuplicateIdError(sample_id, line_number)
        seen.add(sample_id)
        if declared is not None and label not in declared:
            raise UnknownLabelError(label, list(declared))
        try:
            records.append(
                SampleRecord(
                    id=sample_id,
                    image_path=image_path,
                    landmark_path=landmark_path,
                    label=label,
                    cohort=_optional(cohort),
                    split=_optional(split),  # pyright: ignore[reportArgumentType] validated by pydantic
                )
            )
        except ValidationError as e:
            raise ParseError(path, line_number, f"invalid record: {e.errors()[0]['msg']}") from None

    classes = declared if declared is not None else tuple(sorted({r.label for r in records}))
    return Dataset(tuple(records), classes, root)


def load_manifest(path: Path) -> Dataset:
    """Loads and validates a manifest. Relative paths resolve against the manifest's directory."""
    if not path.exists():
        raise MissingPathError(path, "manifest")
    with path.open(encoding="utf-8") as f:
        return parse_manifest_lines(f, path, path.parent)


def format_record(record: SampleRecord) -> str:
    return "\t".join(
        [
            record.id,
            record.image_path,
            record.landmark_path,
            record.label,
            record.cohort or EMPTY_FIELD,
            record.split or EMPTY_FIELD,
        ]
    )


def write_manifest(dataset: Dataset, path: Path) -> None:
    """Writes a manifest that load_manifest parses back into an equal dataset"""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        f.write(f"{CLASSES_HEADER} {','.join(dataset.classes)}\n")
        f.write("# id\timage\tlandmarks\tlabel\tcohort\tsplit\n")
        f.writelines(f"{format_record(record)}\n" for record in dataset.records)
