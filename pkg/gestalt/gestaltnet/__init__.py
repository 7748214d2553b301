from gestalt.gestaltnet.architecture import (
    DEFAULT_CHANNELS,
    POOL_KINDS,
    ArchitectureConfig,
    ArchitectureDescriptor,
    build_descriptor,
)
from gestalt.gestaltnet.model import (
    RegionData,
    RegionModel,
    load_region_data,
    load_region_model,
    save_region_data,
    save_region_model,
)
from gestalt.gestaltnet.schedule import PhaseSchedule, TrainingSchedule
from gestalt.gestaltnet.training import (
    MetricsLog,
    dataset_loss,
    dump_activations,
    finetune_region,
    predict_batch,
    predict_region,
    pretrain_region,
    replace_head,
)

__all__ = [
    "DEFAULT_CHANNELS",
    "POOL_KINDS",
    "ArchitectureConfig",
    "ArchitectureDescriptor",
    "MetricsLog",
    "PhaseSchedule",
    "RegionData",
    "RegionModel",
    "TrainingSchedule",
    "build_descriptor",
    "dataset_loss",
    "dump_activations",
    "finetune_region",
    "load_region_data",
    "load_region_model",
    "predict_batch",
    "predict_region",
    "pretrain_region",
    "replace_head",
    "save_region_data",
    "save_region_model",
]
