from __future__ import annotations

from collections.abc import Sequence

import numpy as np

import gestalt
from gestalt.errors import InvariantViolation, ShapeMismatchError
from gestalt.nn.layers import Layer, LayerSpec, Shape, build_layer


def check_finite(name: str, array: np.ndarray) -> None:
    """Raises when debug checks are on and the array holds NaN or inf"""
    if gestalt.system_config.debug_checks and not np.all(np.isfinite(array)):
        raise InvariantViolation("finite tensors", f"non-finite values after {name}")


class Network:
    """
    Sequential stack of layers built from an ordered spec list.

    Parameter and buffer keys are "<layer name>.<tensor name>". Layer names are the spec kind
    plus a per-kind counter, e.g. conv0 ... conv9, pool0 ... pool4, dense0.
    """

    def __init__(
        self,
        specs: Sequence[LayerSpec],
        input_shape: Shape,
        seed: int | np.random.Generator = 0,
        dtype: type[np.floating] = np.float32,
    ):
        self.input_shape = tuple(input_shape)
        self.dtype = dtype
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.layers: list[Layer] = []
        self.shapes: list[Shape] = []
        counters: dict[str, int] = {}
        shape: Shape = self.input_shape
        for spec in specs:
            index = counters.get(spec.kind, 0)
            counters[spec.kind] = index + 1
            layer, shape = build_layer(f"{spec.kind}{index}", spec, shape, rng, dtype)
            self.layers.append(layer)
            self.shapes.append(shape)

    @property
    def output_shape(self) -> Shape:
        return self.shapes[-1] if self.shapes else self.input_shape

    def layer(self, name: str) -> Layer:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(name)

    @property
    def head(self) -> Layer:
        heads = [layer for layer in self.layers if layer.spec.head]
        if len(heads) != 1:
            raise InvariantViolation("single head layer", f"found {len(heads)}")
        return heads[0]

    def parameters(self) -> dict[str, np.ndarray]:
        """Live references to every trainable tensor"""
        return {f"{layer.name}.{key}": value for layer in self.layers for key, value in layer.params.items()}

    def buffers(self) -> dict[str, np.ndarray]:
        return {f"{layer.name}.{key}": value for layer in self.layers for key, value in layer.buffers.items()}

    def gradients(self) -> dict[str, np.ndarray]:
        return {f"{layer.name}.{key}": value for layer in self.layers for key, value in layer.grads.items()}

    def state(self) -> dict[str, np.ndarray]:
        """Copies of parameters and buffers"""
        return {key: value.copy() for key, value in {**self.parameters(), **self.buffers()}.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        """Overwrites tensors in place. Every key has to exist with the same shape."""
        for layer in self.layers:
            for store in (layer.params, layer.buffers):
                for key, value in store.items():
                    full = f"{layer.name}.{key}"
                    if full not in state:
                        raise ShapeMismatchError(f"load_state {full}", value.shape, None)
                    if state[full].shape != value.shape:
                        raise ShapeMismatchError(f"load_state {full}", value.shape, state[full].shape)
                    store[key] = np.array(state[full], dtype=value.dtype)

    def forward(
        self,
        x: np.ndarray,
        train: bool = False,
        rng: np.random.Generator | None = None,
        update_stats: bool = True,
        capture: Sequence[str] = (),
    ) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        """
        Runs every layer and returns (logits, captured activations).

        `capture` names layers whose outputs are returned copied, e.g. the pooling layers.
        """
        if x.shape[1:] != self.input_shape:
            raise ShapeMismatchError("network input", ("N", *self.input_shape), x.shape)
        out = x.astype(self.dtype, copy=False)
        captured: dict[str, np.ndarray] = {}
        for layer in self.layers:
            out = layer.forward(out, train, rng, update_stats)
            check_finite(layer.name, out)
            if layer.name in capture:
                captured[layer.name] = out.copy()
        return out, captured

    def backward(self, dlogits: np.ndarray) -> np.ndarray:
        """Fills every layer's grads and returns the gradient w.r.t. the input"""
        grad = dlogits
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
            check_finite(f"{layer.name} backward", grad)
        return grad
