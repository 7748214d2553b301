from pathlib import Path
from typing import Any, Self

from loguru import logger
from pydantic import model_validator

from gestalt.dataio import AugmentationPolicy
from gestalt.gestaltnet import (
    ArchitectureConfig,
    RegionData,
    TrainingSchedule,
    finetune_region,
    load_region_data,
    load_region_model,
    pretrain_region,
    save_region_model,
)
from gestalt.gestaltnet.schedule import Stage
from gestalt.jobs import Job
from gestalt.jobs.runners import JobRunner, jobrunner
from gestalt.preproc import RegionTag, load_template


class RegionTrainingJob(Job):
    """Pretraining or fine-tuning of one region expert, from a crop archive to a checkpoint"""

    @property
    def job_type(self) -> str:
        return "region_training"

    stage: Stage
    region: RegionTag
    data_path: Path
    checkpoint_path: Path
    val_path: Path | None = None
    base_checkpoint: Path | None = None
    metrics_path: Path | None = None
    template_path: Path | None = None
    schedule: TrainingSchedule = TrainingSchedule()
    architecture: ArchitectureConfig = ArchitectureConfig()
    augmentation: AugmentationPolicy | None = None
    seed: int = 0
    head_init_scale: float = 0.3
    class_weighting: bool = False
    config_snapshot: dict[str, Any] = {}

    @model_validator(mode="after")
    def finetune_needs_base(self) -> Self:
        if self.stage == "finetune" and self.base_checkpoint is None:
            msg = "fine-tuning jobs need a base checkpoint"
            raise ValueError(msg)
        return self


@jobrunner("region_training")
class RegionTrainingRunner(JobRunner[RegionTrainingJob]):
    job_class = RegionTrainingJob
    MAX_RETRIES = 1

    def setup(self) -> None:
        job = self.job
        self.data: RegionData = load_region_data(job.data_path)
        self.val: RegionData | None = load_region_data(job.val_path) if job.val_path else None

    def run(self) -> Path:
        job = self.job
        logger.debug(f"running {job.stage} job {job.jobname} for {job.region}")
        if job.stage == "pretrain":
            model = pretrain_region(
                self.data,
                job.schedule,
                job.seed,
                architecture=job.architecture,
                policy=job.augmentation,
                val=self.val,
                metrics_path=job.metrics_path,
                template=load_template(job.template_path) if job.template_path else None,
            )
        else:
            assert job.base_checkpoint is not None  # checked by the job model
            model = finetune_region(
                load_region_model(job.base_checkpoint),
                self.data,
                job.schedule,
                job.seed,
                head_init_scale=job.head_init_scale,
                policy=job.augmentation,
                val=self.val,
                metrics_path=job.metrics_path,
                class_weighting=job.class_weighting,
            )
        save_region_model(job.checkpoint_path, model, job.config_snapshot)
        logger.info(f"wrote {job.stage} checkpoint for {job.region} to {job.checkpoint_path}")
        return job.checkpoint_path

    def cleanup(self) -> None:
        self.val = None
