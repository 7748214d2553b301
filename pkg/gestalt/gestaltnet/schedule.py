from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from gestalt.nn import OptimizerState
from gestalt.nn.optim import OptimizerKind

Stage = Literal["pretrain", "finetune"]


class PhaseSchedule(BaseModel):
    """One optimizer phase, e.g. 40 epochs of Adam at 1e-3"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    optimizer: OptimizerKind
    epochs: int = Field(ge=1)
    learning_rate: float = Field(gt=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)

    def scaled(self, factor: float) -> PhaseSchedule:
        return self.model_copy(update={"epochs": max(1, round(self.epochs * factor))})

    def optimizer_state(self) -> OptimizerState:
        if self.optimizer == "adam":
            return OptimizerState.adam(self.learning_rate)
        return OptimizerState.sgd(self.learning_rate, self.momentum)


def _default_pretrain() -> list[PhaseSchedule]:
    return [
        PhaseSchedule(optimizer="adam", epochs=40, learning_rate=1e-3),
        PhaseSchedule(optimizer="sgd_momentum", epochs=10, learning_rate=1e-4, momentum=0.9),
    ]


def _default_finetune() -> list[PhaseSchedule]:
    return [PhaseSchedule(optimizer="sgd_momentum", epochs=500, learning_rate=5e-3, momentum=0.9)]


class TrainingSchedule(BaseModel):
    """
    Both training stages. The epoch counts are the full-scale ones; `scale_factor` shrinks them
    for desk-scale runs, never below one epoch per phase.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    pretrain: list[PhaseSchedule] = Field(default_factory=_default_pretrain, min_length=1)
    finetune: list[PhaseSchedule] = Field(default_factory=_default_finetune, min_length=1)
    batch_size: int = Field(default=64, ge=2)
    scale_factor: float = Field(default=1.0, gt=0.0)

    def phases(self, stage: Stage) -> list[PhaseSchedule]:
        phases = self.pretrain if stage == "pretrain" else self.finetune
        return [phase.scaled(self.scale_factor) for phase in phases]

    def total_epochs(self, stage: Stage) -> int:
        return sum(phase.epochs for phase in self.phases(stage))
