"""
Run configuration.

A run is described by one TOML file. Every table is validated by a pydantic model that rejects
unknown keys. The `[defaults]` table holds region-spec values applied to every region, and each
`[regions.<TAG>]` table overrides them for one region:

    [experiment]
    kind = "multiclass"
    seed = 7

    [defaults]
    margin_top = 0.3

    [regions.Eyes]
    margin_top = 0.4

Relative manifest paths resolve against the directory of the config file. The snapshot written
into each run directory keeps them as written, so two runs of the same file produce the same
snapshot wherever their output goes.
"""

from __future__ import annotations

import tomllib
from pathlib import Path
from typing import Any, Literal, Self

import toml
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from gestalt.dataio import AugmentationPolicy, SyntheticConfig
from gestalt.ensemble import EnsembleMode
from gestalt.errors import ConfigError, MissingPathError, ParseError
from gestalt.gestaltnet import ArchitectureConfig, PhaseSchedule, TrainingSchedule
from gestalt.preproc import RegionSpec, RegionTag, region_specs

ExperimentKind = Literal["binary", "specialized", "multiclass"]
Truncation = Literal["restrict", "subset_head"]

DEFAULTS_TABLE = "defaults"
REGIONS_TABLE = "regions"
# set by the region tag and the architecture input side
FIXED_REGION_KEYS = {"tag", "side"}


class StrictModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ExperimentSection(StrictModel):
    kind: ExperimentKind
    name: str = "experiment"
    seed: int = Field(default=0, ge=0)
    scale_factor: float = Field(default=1.0, gt=0.0)
    regions: list[RegionTag] = list(RegionTag)
    workers: int | None = Field(default=None, ge=1)
    train_fraction: float = Field(default=0.9, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def unique_regions(self) -> Self:
        if not self.regions or len(set(self.regions)) != len(self.regions):
            msg = f"regions must be a non-empty list without repeats, got {[str(r) for r in self.regions]}"
            raise ValueError(msg)
        return self


class DataSection(StrictModel):
    train_manifest: Path | None = None
    test_manifest: Path | None = None
    pretrain_manifest: Path | None = None
    synthetic: SyntheticConfig | None = None

    @model_validator(mode="after")
    def one_source(self) -> Self:
        manifests = self.train_manifest is not None or self.test_manifest is not None
        if manifests == (self.synthetic is not None):
            msg = "give either train_manifest and test_manifest or a [data.synthetic] table"
            raise ValueError(msg)
        if manifests and (self.train_manifest is None or self.test_manifest is None):
            msg = "train_manifest and test_manifest go together"
            raise ValueError(msg)
        return self

    def manifest_paths(self, base_dir: Path) -> list[Path]:
        paths = [self.train_manifest, self.test_manifest, self.pretrain_manifest]
        return [path if path.is_absolute() else base_dir / path for path in paths if path is not None]


class PreprocessSection(StrictModel):
    canvas_side: int = Field(default=128, ge=16)
    iod_fraction: float = Field(default=0.3, gt=0.0, lt=1.0)


class CohortsSection(StrictModel):
    positive: list[str] = []
    negative: list[str] = []
    positive_name: str = "positive"
    negative_name: str = "negative"

    @model_validator(mode="after")
    def disjoint(self) -> Self:
        overlap = set(self.positive) & set(self.negative)
        if overlap:
            msg = f"labels in both cohorts: {sorted(overlap)}"
            raise ValueError(msg)
        if self.positive_name == self.negative_name:
            msg = "the two cohorts need different names"
            raise ValueError(msg)
        return self


class SpecializedSection(StrictModel):
    classes: list[str] = []
    holdout_per_class: int = Field(default=5, ge=1)
    truncation: Truncation = "restrict"


class ScheduleSection(StrictModel):
    pretrain: list[PhaseSchedule] = Field(default_factory=lambda: TrainingSchedule().pretrain, min_length=1)
    finetune: list[PhaseSchedule] = Field(default_factory=lambda: TrainingSchedule().finetune, min_length=1)
    batch_size: int = Field(default=64, ge=2)
    head_init_scale: float = Field(default=0.3, ge=0.0)
    class_weighting: bool = False

    def training_schedule(self, scale_factor: float) -> TrainingSchedule:
        return TrainingSchedule(
            pretrain=self.pretrain, finetune=self.finetune, batch_size=self.batch_size, scale_factor=scale_factor
        )


class EnsembleSection(StrictModel):
    mode: EnsembleMode = "softmax"


class EvaluationSection(StrictModel):
    top_k: list[int] = [1, 5, 10]
    permutation_draws: int = Field(default=10**6, ge=1)
    min_image_side: int = Field(default=100, ge=1)
    plots: bool = True
    composites: bool = True


class ExperimentConfig(StrictModel):
    experiment: ExperimentSection
    data: DataSection
    preprocess: PreprocessSection = PreprocessSection()
    cohorts: CohortsSection | None = None
    specialized: SpecializedSection | None = None
    architecture: ArchitectureConfig = ArchitectureConfig()
    schedule: ScheduleSection = ScheduleSection()
    augmentation: AugmentationPolicy = AugmentationPolicy()
    regions: dict[RegionTag, dict[str, Any]] = {}
    ensemble: EnsembleSection = EnsembleSection()
    evaluation: EvaluationSection = EvaluationSection()
    # directory manifest paths resolve against; never part of a snapshot
    base_dir: Path = Field(default=Path(), exclude=True)

    @model_validator(mode="after")
    def kind_sections(self) -> Self:
        kind = self.experiment.kind
        if kind == "binary" and self.cohorts is None:
            msg = "binary experiments need a [cohorts] table"
            raise ValueError(msg)
        if kind == "specialized" and self.specialized is None:
            msg = "specialized experiments need a [specialized] table"
            raise ValueError(msg)
        # fail on bad margin overrides before any work starts
        self.region_specs()
        return self

    @property
    def seed(self) -> int:
        return self.experiment.seed

    @property
    def training_schedule(self) -> TrainingSchedule:
        return self.schedule.training_schedule(self.experiment.scale_factor)

    def region_specs(self) -> list[RegionSpec]:
        overrides = {str(tag): values for tag, values in self.regions.items()}
        return region_specs(self.experiment.regions, self.architecture.input_side, overrides)

    def resolve(self, path: Path) -> Path:
        return path if path.is_absolute() else self.base_dir / path

    def check_paths(self) -> None:
        for path in self.data.manifest_paths(self.base_dir):
            if not path.exists():
                raise MissingPathError(path, "manifest")


def _describe(error: ValidationError) -> str:
    problems: list[str] = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        if item["type"] == "extra_forbidden":
            problems.append(f"unknown key {location}")
        else:
            problems.append(f"{location}: {item['msg']}")
    return "; ".join(problems)


def _merge_region_tables(path: Path, raw: dict[str, Any]) -> dict[str, Any]:
    defaults: dict[str, Any] = raw.pop(DEFAULTS_TABLE, {})
    tables: dict[str, Any] = raw.pop(REGIONS_TABLE, {})
    known = {str(tag) for tag in RegionTag}
    for name in tables:
        if name not in known:
            raise ConfigError(path, f"unknown region [{REGIONS_TABLE}.{name}], expected one of {sorted(known)}")
    for name, values in [(DEFAULTS_TABLE, defaults), *tables.items()]:
        fixed = sorted(set(values) & FIXED_REGION_KEYS)
        if fixed:
            raise ConfigError(path, f"{name}: {fixed} cannot be overridden per region")
    regions = raw.get("experiment", {}).get("regions", [str(tag) for tag in RegionTag])
    merged = {str(tag): {**defaults, **tables.get(str(tag), {})} for tag in regions}
    return {**raw, REGIONS_TABLE: {tag: values for tag, values in merged.items() if values}}


def parse_config(
    raw: dict[str, Any],
    path: Path | str = "<config>",
    base_dir: Path = Path(),
    overrides: dict[str, Any] | None = None,
) -> ExperimentConfig:
    """Validates a parsed TOML document. `overrides` replace keys of the [experiment] table."""
    raw = _merge_region_tables(Path(path), dict(raw))
    experiment = {**raw.get("experiment", {}), **{k: v for k, v in (overrides or {}).items() if v is not None}}
    try:
        config = ExperimentConfig.model_validate({**raw, "experiment": experiment, "base_dir": base_dir})
    except ValidationError as e:
        raise ConfigError(path, _describe(e)) from None
    return config


def load_config(path: Path, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    if not path.exists():
        raise MissingPathError(path, "config file")
    try:
        with path.open("rb") as f:
            raw = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ParseError(path, 0, str(e)) from None
    logger.info(f"parsing config file {path}")
    return parse_config(raw, path, path.parent, overrides)


def config_snapshot(config: ExperimentConfig) -> dict[str, Any]:
    """JSON-compatible view of the effective config, as embedded in checkpoints and reports"""
    return config.model_dump(mode="json", exclude_none=True)


def write_config_snapshot(path: Path, config: ExperimentConfig) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(toml.dumps(config_snapshot(config)), encoding="utf-8")


class RunConfig(BaseModel):
    """Everything one CLI invocation acts on"""

    model_config = ConfigDict(frozen=True)

    command: str
    out: Path
    config_path: Path | None = None
    experiment: ExperimentConfig | None = None
    seed: int | None = None
    scale_factor: float | None = None
    workers: int = Field(default=1, ge=1)
    log_level: str = "INFO"

    def check_paths(self) -> None:
        if self.config_path is not None and not self.config_path.exists():
            raise MissingPathError(self.config_path, "config file")
        if self.experiment is not None:
            self.experiment.check_paths()
