"""
The region expert network.

Five pairs of 3x3 convolutions. Every convolution but the last is followed by batch norm and
ReLU. Each pair ends in a 2x2 pool: max after the first four pairs, average after the fifth.
The features are flattened and go through dropout into a dense head, one unit per class,
whose softmax is the region's score vector.
"""

from __future__ import annotations

from typing import Self

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from gestalt.nn import LayerSpec
from gestalt.nn.layers import Shape

DEFAULT_CHANNELS = (32, 32, 64, 64, 96, 96, 128, 128, 160, 160)
POOL_KINDS = ("max", "max", "max", "max", "avg")


class ArchitectureConfig(BaseModel):
    """The `[architecture]` config table"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    input_side: int = Field(default=100, ge=2)
    channels: tuple[int, ...] = DEFAULT_CHANNELS
    kernel_size: int = Field(default=3, ge=1)
    pool_window: int = Field(default=2, ge=1)
    dropout: float = Field(default=0.5, ge=0.0, lt=1.0)
    bn_momentum: float = Field(default=0.9, ge=0.0, le=1.0)
    bn_epsilon: float = Field(default=1e-3, gt=0.0)

    @field_validator("channels")
    @classmethod
    def ten_positive_channels(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if len(value) != 10 or any(c <= 0 for c in value):
            msg = f"channels must be 10 positive integers, got {list(value)}"
            raise ValueError(msg)
        return value


class ArchitectureDescriptor(BaseModel):
    """Ordered layer list of one region network plus its input side and class count."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    input_side: int
    classes: int = Field(ge=1)
    layers: tuple[LayerSpec, ...]

    @model_validator(mode="after")
    def check_layout(self) -> Self:
        kinds = [layer.kind for layer in self.layers]
        convs = [i for i, kind in enumerate(kinds) if kind == "conv"]
        pools = [layer.pool for layer in self.layers if layer.kind == "pool"]
        if len(convs) != 10:
            msg = f"expected 10 conv layers, got {len(convs)}"
            raise ValueError(msg)
        if tuple(pools) != POOL_KINDS:
            msg = f"expected pooling kinds {list(POOL_KINDS)}, got {pools}"
            raise ValueError(msg)
        for position, index in enumerate(convs):
            follows = kinds[index + 1 : index + 3]
            wants_bn = position < len(convs) - 1
            if (follows == ["batchnorm", "relu"]) != wants_bn:
                msg = f"conv layer {position} {'needs' if wants_bn else 'must not have'} batch norm + ReLU"
                raise ValueError(msg)
        heads = [layer for layer in self.layers if layer.head]
        if len(heads) != 1 or heads[0].kind != "dense" or self.layers[-1] is not heads[0]:
            msg = "the last layer must be the only head and a dense layer"
            raise ValueError(msg)
        if heads[0].units != self.classes:
            msg = f"head width {heads[0].units} != class count {self.classes}"
            raise ValueError(msg)
        return self

    @property
    def input_shape(self) -> Shape:
        return (1, self.input_side, self.input_side)

    @property
    def bn_relu_flags(self) -> list[bool]:
        """One flag per conv layer: whether batch norm + ReLU follow it"""
        kinds = [layer.kind for layer in self.layers]
        return [kinds[i + 1 : i + 3] == ["batchnorm", "relu"] for i, kind in enumerate(kinds) if kind == "conv"]

    def with_classes(self, classes: int) -> ArchitectureDescriptor:
        layers = tuple(layer.model_copy(update={"units": classes}) if layer.head else layer for layer in self.layers)
        return ArchitectureDescriptor(input_side=self.input_side, classes=classes, layers=layers)


def build_descriptor(config: ArchitectureConfig, classes: int) -> ArchitectureDescriptor:
    bn = LayerSpec(kind="batchnorm", momentum=config.bn_momentum, epsilon=config.bn_epsilon)
    relu = LayerSpec(kind="relu")
    layers: list[LayerSpec] = []
    for pair, pool in enumerate(POOL_KINDS):
        for position in (2 * pair, 2 * pair + 1):
            layers.append(
                LayerSpec(
                    kind="conv",
                    channels=config.channels[position],
                    kernel=config.kernel_size,
                    padding=config.kernel_size // 2,
                )
            )
            if position < 9:
                layers.extend((bn, relu))
        layers.append(LayerSpec(kind="pool", pool=pool, window=config.pool_window, stride=config.pool_window))
    layers.extend(
        (
            LayerSpec(kind="flatten"),
            LayerSpec(kind="dropout", rate=config.dropout),
            LayerSpec(kind="dense", units=classes, head=True),
        )
    )
    return ArchitectureDescriptor(input_side=config.input_side, classes=classes, layers=tuple(layers))
