from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from gestalt.errors import ShapeMismatchError

OptimizerKind = Literal["adam", "sgd_momentum"]


@dataclass
class OptimizerState:
    """
    Optimizer hyperparameters plus per-parameter buffers, keyed like the parameter dict.

    Adam keeps first/second moments and the timestep, SGD keeps velocities. Buffers are created
    lazily on the first step with the parameter's shape and dtype.
    """

    kind: OptimizerKind
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    momentum: float = 0.9
    timestep: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict[str, np.ndarray])
    second_moment: dict[str, np.ndarray] = field(default_factory=dict[str, np.ndarray])
    velocity: dict[str, np.ndarray] = field(default_factory=dict[str, np.ndarray])

    @classmethod
    def adam(cls, learning_rate: float = 1e-3) -> OptimizerState:
        return cls(kind="adam", learning_rate=learning_rate)

    @classmethod
    def sgd(cls, learning_rate: float, momentum: float = 0.9) -> OptimizerState:
        return cls(kind="sgd_momentum", learning_rate=learning_rate, momentum=momentum)

    def buffers(self) -> dict[str, np.ndarray]:
        """Flat view of every buffer, for checkpoints"""
        out: dict[str, np.ndarray] = {}
        for prefix, buffer in (("m", self.first_moment), ("v", self.second_moment), ("velocity", self.velocity)):
            out.update({f"{prefix}/{name}": value for name, value in buffer.items()})
        return out

    def load_buffers(self, buffers: dict[str, np.ndarray]) -> None:
        targets = {"m": self.first_moment, "v": self.second_moment, "velocity": self.velocity}
        for key, value in buffers.items():
            prefix, name = key.split("/", 1)
            targets[prefix][name] = value

    def hyperparameters(self) -> dict[str, float | int | str]:
        return {
            "kind": self.kind,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "momentum": self.momentum,
            "timestep": self.timestep,
        }


def optimizer_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: OptimizerState,
) -> dict[str, np.ndarray]:
    """Updates params in place and returns them. Only parameters with a gradient are touched."""
    for name, grad in grads.items():
        if name not in params or params[name].shape != grad.shape:
            raise ShapeMismatchError(f"optimizer_step {name}", params[name].shape if name in params else None, grad.shape)

    if state.kind == "adam":
        state.timestep += 1
        t = state.timestep
        correction1 = 1 - state.beta1**t
        correction2 = 1 - state.beta2**t
        for name in sorted(grads):
            grad, param = grads[name], params[name]
            m = state.first_moment.setdefault(name, np.zeros_like(param))
            v = state.second_moment.setdefault(name, np.zeros_like(param))
            m *= state.beta1
            m += (1 - state.beta1) * grad
            v *= state.beta2
            v += (1 - state.beta2) * grad * grad
            param -= (state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)).astype(
                param.dtype
            )
    else:
        for name in sorted(grads):
            grad, param = grads[name], params[name]
            velocity = state.velocity.setdefault(name, np.zeros_like(param))
            velocity *= state.momentum
            velocity -= state.learning_rate * grad
            param += velocity
        state.timestep += 1
    return params
