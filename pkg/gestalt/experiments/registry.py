from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from gestalt.experiments.pipeline import ExperimentDriver

EXPERIMENT_REGISTRY: dict[str, type[ExperimentDriver]] = {}


def experiment(kind: str):
    """Load an experiment driver into the registry"""

    def wrapper[D: type[ExperimentDriver]](cls: D) -> D:
        cls.kind = kind
        EXPERIMENT_REGISTRY[kind] = cls
        return cls

    return wrapper
