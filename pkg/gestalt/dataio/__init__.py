from gestalt.dataio.augment import (
    AugmentationParams,
    AugmentationPolicy,
    apply_augmentation,
    augment,
    augment_batch,
    sample_augmentation_params,
    sample_rng,
)
from gestalt.dataio.manifest import Dataset, SampleRecord, load_manifest, write_manifest
from gestalt.dataio.samples import SampleLoader, content_hash, read_image
from gestalt.dataio.splits import (
    CohortStatistics,
    Exclusion,
    cohort_statistics,
    deduplicate_and_exclude,
    exclude_unusable,
    split_dataset,
)
from gestalt.dataio.synthetic import SyntheticConfig, generate_identity_data, generate_syndrome_data

__all__ = [
    "AugmentationParams",
    "AugmentationPolicy",
    "CohortStatistics",
    "Dataset",
    "Exclusion",
    "SampleLoader",
    "SampleRecord",
    "SyntheticConfig",
    "apply_augmentation",
    "augment",
    "augment_batch",
    "cohort_statistics",
    "content_hash",
    "deduplicate_and_exclude",
    "exclude_unusable",
    "generate_identity_data",
    "generate_syndrome_data",
    "load_manifest",
    "read_image",
    "sample_augmentation_params",
    "sample_rng",
    "split_dataset",
    "write_manifest",
]
