from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from gestalt.errors import JobFailedError, MissingPathError
from gestalt.gestaltnet import (
    ArchitectureConfig,
    PhaseSchedule,
    RegionData,
    TrainingSchedule,
    load_region_model,
    save_region_data,
)
from gestalt.jobs.pooler import run_jobs
from gestalt.jobs.runners import RUNNER_REGISTRY, get_runner
from gestalt.jobs.runners.region import RegionTrainingJob, RegionTrainingRunner
from gestalt.preproc import RegionCrop, RegionTag

TINY = ArchitectureConfig(input_side=32, channels=(4,) * 10, dropout=0.0)
SHORT = TrainingSchedule(
    pretrain=[PhaseSchedule(optimizer="adam", epochs=1, learning_rate=1e-3)],
    finetune=[PhaseSchedule(optimizer="sgd_momentum", epochs=1, learning_rate=1e-2)],
    batch_size=4,
)


def write_data(path: Path, tag: RegionTag, classes: tuple[str, ...], per_class: int = 3) -> Path:
    rng = np.random.default_rng(0)
    crops = [RegionCrop(tag, rng.random((32, 32))) for _ in range(len(classes) * per_class)]
    labels = [label for label in classes for _ in range(per_class)]
    ids = tuple(f"s{i:02d}" for i in range(len(crops)))
    save_region_data(path, RegionData.from_crops(crops, labels, classes, ids))
    return path


def pretrain_job(tmp_path: Path, tag: RegionTag = RegionTag.EYES, seed: int = 0) -> RegionTrainingJob:
    return RegionTrainingJob(
        jobname=f"pretrain_{tag}",
        stage="pretrain",
        region=tag,
        data_path=write_data(tmp_path / f"identities_{tag}.npz", tag, ("id_a", "id_b")),
        checkpoint_path=tmp_path / "checkpoints" / f"{tag}_base.npz",
        schedule=SHORT,
        architecture=TINY,
        seed=seed,
    )


def test_runner_registry():
    job = RegionTrainingJob(
        jobname="x", stage="pretrain", region=RegionTag.NOSE, data_path=Path("a"), checkpoint_path=Path("b")
    )
    assert job.job_type == "region_training"
    assert isinstance(get_runner(job.job_type, job.model_dump_json()), RegionTrainingRunner)
    assert RUNNER_REGISTRY["region_training"] is RegionTrainingRunner
    with pytest.raises(ValueError, match="No runner registered"):
        get_runner("render_video", "{}")


def test_finetune_jobs_need_a_base_checkpoint():
    with pytest.raises(ValidationError, match="base checkpoint"):
        RegionTrainingJob(
            jobname="x", stage="finetune", region=RegionTag.NOSE, data_path=Path("a"), checkpoint_path=Path("b")
        )


def test_inline_pretrain_then_finetune(tmp_path: Path):
    pretrain = pretrain_job(tmp_path)
    results = run_jobs([pretrain])
    assert results == {pretrain.jobname: str(pretrain.checkpoint_path)}
    base = load_region_model(pretrain.checkpoint_path)
    assert base.phase == "pretrained"
    assert base.labels == ("id_a", "id_b")

    finetune = RegionTrainingJob(
        jobname="finetune_Eyes",
        stage="finetune",
        region=RegionTag.EYES,
        data_path=write_data(tmp_path / "train_Eyes.npz", RegionTag.EYES, ("syn_a", "syn_b", "syn_c")),
        checkpoint_path=tmp_path / "checkpoints" / "Eyes.npz",
        base_checkpoint=pretrain.checkpoint_path,
        metrics_path=tmp_path / "metrics" / "Eyes.jsonl",
        schedule=SHORT,
        seed=1,
        config_snapshot={"experiment": {"name": "jobs"}},
    )
    run_jobs([finetune])

    model = load_region_model(finetune.checkpoint_path)
    assert model.phase == "finetuned"
    assert model.labels == ("syn_a", "syn_b", "syn_c")
    assert finetune.metrics_path is not None
    assert finetune.metrics_path.exists()


def test_missing_data_fails_the_job(tmp_path: Path):
    job = pretrain_job(tmp_path).model_copy(update={"data_path": tmp_path / "absent.npz"})
    with pytest.raises(MissingPathError):
        run_jobs([job])


@pytest.mark.slow
def test_worker_pool_matches_inline_runs(tmp_path: Path):
    inline_dir, pooled_dir = tmp_path / "inline", tmp_path / "pooled"
    inline_dir.mkdir()
    pooled_dir.mkdir()
    inline = [pretrain_job(inline_dir, tag, seed=i) for i, tag in enumerate((RegionTag.EYES, RegionTag.NOSE))]
    pooled = [pretrain_job(pooled_dir, tag, seed=i) for i, tag in enumerate((RegionTag.EYES, RegionTag.NOSE))]

    run_jobs(inline, workers=1)
    results = run_jobs(pooled, workers=2)

    assert set(results) == {job.jobname for job in pooled}
    for a, b in zip(inline, pooled, strict=True):
        assert a.checkpoint_path.read_bytes() == b.checkpoint_path.read_bytes()


@pytest.mark.slow
def test_worker_pool_reports_job_failures(tmp_path: Path):
    good = pretrain_job(tmp_path)
    bad = good.model_copy(update={"jobname": "broken", "data_path": tmp_path / "absent.npz"})
    with pytest.raises(JobFailedError) as excinfo:
        run_jobs([good, bad], workers=2)
    assert excinfo.value.jobname == "broken"
