"""
Layer objects wrapping the functional ops.

Layers are built from `LayerSpec` descriptors through a registry keyed by spec kind. A layer
registers itself with the `@register_layer(kind)` decorator at import time.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Callable
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from gestalt.errors import ShapeMismatchError
from gestalt.nn import functional as F
from gestalt.nn.init import init_he_normal

LayerKind = Literal["conv", "batchnorm", "relu", "pool", "flatten", "dropout", "dense"]
Shape = tuple[int, ...]


class LayerSpec(BaseModel):
    """One entry of an architecture's ordered layer list. Unused fields stay at their defaults."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: LayerKind
    channels: int = Field(default=0, ge=0)
    kernel: int = Field(default=3, ge=1)
    stride: int = Field(default=1, ge=1)
    padding: int = Field(default=1, ge=0)
    pool: F.PoolKind = "max"
    window: int = Field(default=2, ge=1)
    rate: float = Field(default=0.5, ge=0.0, lt=1.0)
    units: int = Field(default=0, ge=0)
    momentum: float = Field(default=0.9, ge=0.0, le=1.0)
    epsilon: float = Field(default=1e-3, gt=0.0)
    head: bool = False


class Layer(ABC):
    """
    Base class of a network layer.

    attributes:
        name: unique name inside the network, prefixes parameter keys ("conv3.weight")
        spec: descriptor the layer was built from
        params: trainable tensors
        buffers: non-trainable state saved with the model (batch norm running statistics)
        grads: gradients of the last backward pass, same keys as params
    """

    def __init__(self, name: str, spec: LayerSpec):
        self.name = name
        self.spec = spec
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache: Any = None

    @classmethod
    @abstractmethod
    def build(
        cls, name: str, spec: LayerSpec, input_shape: Shape, rng: np.random.Generator, dtype: type[np.floating]
    ) -> Layer:
        pass

    @staticmethod
    @abstractmethod
    def output_shape(spec: LayerSpec, input_shape: Shape) -> Shape:
        pass

    @abstractmethod
    def forward(
        self, x: np.ndarray, train: bool, rng: np.random.Generator | None = None, update_stats: bool = True
    ) -> np.ndarray:
        pass

    @abstractmethod
    def backward(self, dout: np.ndarray) -> np.ndarray:
        pass


LAYER_REGISTRY: dict[str, type[Layer]] = {}


def register_layer(kind: LayerKind) -> Callable[[type[Layer]], type[Layer]]:
    """decorator that adds a layer class to the registry at import time"""

    def decorator(cls: type[Layer]) -> type[Layer]:
        LAYER_REGISTRY[kind] = cls
        return cls

    return decorator


def build_layer(
    name: str, spec: LayerSpec, input_shape: Shape, rng: np.random.Generator, dtype: type[np.floating]
) -> tuple[Layer, Shape]:
    cls = LAYER_REGISTRY[spec.kind]
    return cls.build(name, spec, input_shape, rng, dtype), cls.output_shape(spec, input_shape)


@register_layer("conv")
class Conv2D(Layer):
    @classmethod
    def build(
        cls, name: str, spec: LayerSpec, input_shape: Shape, rng: np.random.Generator, dtype: type[np.floating]
    ) -> Layer:
        layer = cls(name, spec)
        shape = (spec.channels, input_shape[0], spec.kernel, spec.kernel)
        layer.params = {"weight": init_he_normal(shape, rng, dtype), "bias": np.zeros(spec.channels, dtype=dtype)}
        return layer

    @staticmethod
    def output_shape(spec: LayerSpec, input_shape: Shape) -> Shape:
        if len(input_shape) != 3:
            raise ShapeMismatchError("conv", "(C, H, W)", input_shape)
        sides = [(s + 2 * spec.padding - spec.kernel) // spec.stride + 1 for s in input_shape[1:]]
        if min(sides) < 1:
            raise ShapeMismatchError("conv", f"spatial size >= {spec.kernel - 2 * spec.padding}", input_shape)
        return (spec.channels, *sides)

    def forward(
        self, x: np.ndarray, train: bool, rng: np.random.Generator | None = None, update_stats: bool = True
    ) -> np.ndarray:
        out, self._cache = F.conv2d_forward(x, self.params["weight"], self.params["bias"], self.spec.stride, self.spec.padding)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        dx, self.grads["weight"], self.grads["bias"] = F.conv2d_backward(dout, self._cache)
        return dx


@register_layer("batchnorm")
class BatchNorm(Layer):
    @classmethod
    def build(
        cls, name: str, spec: LayerSpec, input_shape: Shape, rng: np.random.Generator, dtype: type[np.floating]
    ) -> Layer:
        layer = cls(name, spec)
        channels = input_shape[0]
        layer.params = {"gamma": np.ones(channels, dtype=dtype), "beta": np.zeros(channels, dtype=dtype)}
        layer.buffers = {"running_mean": np.zeros(channels, dtype=dtype), "running_var": np.ones(channels, dtype=dtype)}
        return layer

    @staticmethod
    def output_shape(spec: LayerSpec, input_shape: Shape) -> Shape:
        return input_shape

    def forward(
        self, x: np.ndarray, train: bool, rng: np.random.Generator | None = None, update_stats: bool = True
    ) -> np.ndarray:
        out, self._cache = F.batchnorm_forward(
            x,
            self.params["gamma"],
            self.params["beta"],
            self.buffers["running_mean"],
            self.buffers["running_var"],
            train,
            self.spec.momentum,
            self.spec.epsilon,
            update_stats,
        )
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        dx, self.grads["gamma"], self.grads["beta"] = F.batchnorm_backward(dout, self._cache)
        return dx


@register_layer("relu")
class ReLU(Layer):
    @classmethod
    def build(
        cls, name: str, spec: LayerSpec, input_shape: Shape, rng: np.random.Generator, dtype: type[np.floating]
    ) -> Layer:
        return cls(name, spec)

    @staticmethod
    def output_shape(spec: LayerSpec, input_shape: Shape) -> Shape:
        return input_shape

    def forward(
        self, x: np.ndarray, train: bool, rng: np.random.Generator | None = None, update_stats: bool = True
    ) -> np.ndarray:
        out, self._cache = F.relu_forward(x)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return F.relu_backward(dout, self._cache)


@register_layer("pool")
class Pool2D(Layer):
    @classmethod
    def build(
        cls, name: str, spec: LayerSpec, input_shape: Shape, rng: np.random.Generator, dtype: type[np.floating]
    ) -> Layer:
        return cls(name, spec)

    @staticmethod
    def output_shape(spec: LayerSpec, input_shape: Shape) -> Shape:
        sides = [(s - spec.window) // spec.stride + 1 for s in input_shape[1:]]
        if min(input_shape[1:]) < spec.window:
            raise ShapeMismatchError("pool", f"spatial size >= {spec.window}", input_shape)
        return (input_shape[0], *sides)

    def forward(
        self, x: np.ndarray, train: bool, rng: np.random.Generator | None = None, update_stats: bool = True
    ) -> np.ndarray:
        out, self._cache = F.pool2d_forward(x, self.spec.pool, self.spec.window, self.spec.stride)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return F.pool2d_backward(dout, self._cache)


@register_layer("flatten")
class Flatten(Layer):
    @classmethod
    def build(
        cls, name: str, spec: LayerSpec, input_shape: Shape, rng: np.random.Generator, dtype: type[np.floating]
    ) -> Layer:
        return cls(name, spec)

    @staticmethod
    def output_shape(spec: LayerSpec, input_shape: Shape) -> Shape:
        return (int(np.prod(input_shape)),)

    def forward(
        self, x: np.ndarray, train: bool, rng: np.random.Generator | None = None, update_stats: bool = True
    ) -> np.ndarray:
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout.reshape(self._cache)


@register_layer("dropout")
class Dropout(Layer):
    @classmethod
    def build(
        cls, name: str, spec: LayerSpec, input_shape: Shape, rng: np.random.Generator, dtype: type[np.floating]
    ) -> Layer:
        return cls(name, spec)

    @staticmethod
    def output_shape(spec: LayerSpec, input_shape: Shape) -> Shape:
        return input_shape

    def forward(
        self, x: np.ndarray, train: bool, rng: np.random.Generator | None = None, update_stats: bool = True
    ) -> np.ndarray:
        out, self._cache = F.dropout_forward(x, self.spec.rate, train, rng)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return F.dropout_backward(dout, self._cache)


@register_layer("dense")
class Dense(Layer):
    @classmethod
    def build(
        cls, name: str, spec: LayerSpec, input_shape: Shape, rng: np.random.Generator, dtype: type[np.floating]
    ) -> Layer:
        layer = cls(name, spec)
        if len(input_shape) != 1:
            raise ShapeMismatchError("dense", "(D,)", input_shape)
        layer.params = {
            "weight": init_he_normal((input_shape[0], spec.units), rng, dtype),
            "bias": np.zeros(spec.units, dtype=dtype),
        }
        return layer

    @staticmethod
    def output_shape(spec: LayerSpec, input_shape: Shape) -> Shape:
        return (spec.units,)

    def forward(
        self, x: np.ndarray, train: bool, rng: np.random.Generator | None = None, update_stats: bool = True
    ) -> np.ndarray:
        out, self._cache = F.fc_forward(x, self.params["weight"], self.params["bias"])
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        dx, self.grads["weight"], self.grads["bias"] = F.fc_backward(dout, self._cache)
        return dx
