"""
Forward and backward math for the fixed layer set.

All tensors are numpy arrays laid out (batch, channels, height, width) or (batch, features).
Forward functions return (output, cache); backward functions take the upstream gradient and
that cache. Reductions run in a fixed order so results are bit-stable for a given input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from gestalt.errors import DegenerateBatchError, InvalidLabelError, ShapeMismatchError

PoolKind = Literal["max", "avg"]


def _output_side(size: int, kernel: int, stride: int, padding: int, op: str) -> int:
    side = (size + 2 * padding - kernel) // stride + 1
    if size + 2 * padding < kernel or side < 1:
        raise ShapeMismatchError(op, f"spatial size >= {kernel - 2 * padding}", size)
    return side


def _strided(x: np.ndarray, i: int, j: int, stride: int, rows: int, cols: int) -> np.ndarray:
    return x[:, :, i : i + stride * (rows - 1) + 1 : stride, j : j + stride * (cols - 1) + 1 : stride]


# convolution
@dataclass
class ConvCache:
    padded: np.ndarray
    weight: np.ndarray
    stride: int
    padding: int


def conv2d_forward(
    x: np.ndarray,
    weight: np.ndarray,
    bias: np.ndarray,
    stride: int = 1,
    padding: int = 0,
) -> tuple[np.ndarray, ConvCache]:
    """Cross-correlation of x (N, C, H, W) with weight (F, C, kh, kw) plus bias (F,)."""
    if x.ndim != 4:
        raise ShapeMismatchError("conv2d", "(N, C, H, W)", x.shape)
    if weight.ndim != 4 or weight.shape[1] != x.shape[1]:
        raise ShapeMismatchError("conv2d", f"(F, {x.shape[1]}, kh, kw)", weight.shape)
    if bias.shape != (weight.shape[0],):
        raise ShapeMismatchError("conv2d bias", (weight.shape[0],), bias.shape)
    filters, _, kh, kw = weight.shape
    rows = _output_side(x.shape[2], kh, stride, padding, "conv2d")
    cols = _output_side(x.shape[3], kw, stride, padding, "conv2d")
    padded = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x

    # accumulated as (F, N, rows, cols)
    out = np.zeros((filters, x.shape[0], rows, cols), dtype=np.result_type(x, weight))
    for i in range(kh):
        for j in range(kw):
            out += np.tensordot(weight[:, :, i, j], _strided(padded, i, j, stride, rows, cols), axes=([1], [1]))
    out = out.transpose(1, 0, 2, 3) + bias.reshape(1, -1, 1, 1)
    return np.ascontiguousarray(out), ConvCache(padded, weight, stride, padding)


def conv2d_backward(dout: np.ndarray, cache: ConvCache) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dweight, dbias)."""
    padded, weight, stride, padding = cache.padded, cache.weight, cache.stride, cache.padding
    _, _, kh, kw = weight.shape
    rows, cols = dout.shape[2], dout.shape[3]
    dbias = dout.sum(axis=(0, 2, 3))
    dweight = np.zeros_like(weight)
    dpadded = np.zeros_like(padded)
    for i in range(kh):
        for j in range(kw):
            window = _strided(padded, i, j, stride, rows, cols)
            dweight[:, :, i, j] = np.tensordot(dout, window, axes=([0, 2, 3], [0, 2, 3]))
            _strided(dpadded, i, j, stride, rows, cols)[...] += np.tensordot(
                weight[:, :, i, j], dout, axes=([0], [1])
            ).transpose(1, 0, 2, 3)
    if padding:
        dpadded = dpadded[:, :, padding:-padding, padding:-padding]
    return dpadded, dweight, dbias


# batch normalization
@dataclass
class BatchNormCache:
    normalized: np.ndarray
    inv_std: np.ndarray
    gamma: np.ndarray
    axes: tuple[int, ...]
    count: int


def _bn_axes(x: np.ndarray) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Reduction axes and the broadcast shape of per-channel parameters"""
    if x.ndim == 4:
        return (0, 2, 3), (1, -1, 1, 1)
    if x.ndim == 2:
        return (0,), (1, -1)
    raise ShapeMismatchError("batchnorm", "(N, C, H, W) or (N, D)", x.shape)


def batchnorm_forward(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    train: bool,
    momentum: float = 0.9,
    epsilon: float = 1e-3,
    update_stats: bool = True,
) -> tuple[np.ndarray, BatchNormCache | None]:
    """
    Train mode normalizes with batch statistics and, with update_stats, moves the running
    statistics in place: running = momentum * running + (1 - momentum) * batch. The running
    variance takes the unbiased batch variance. Infer mode uses the running statistics and
    returns no cache.
    """
    axes, shape = _bn_axes(x)
    if gamma.shape != (x.shape[1],):
        raise ShapeMismatchError("batchnorm gamma", (x.shape[1],), gamma.shape)
    if not train:
        inv_std = 1.0 / np.sqrt(running_var + epsilon)
        scale = (gamma * inv_std).reshape(shape)
        shift = (beta - running_mean * gamma * inv_std).reshape(shape)
        return x * scale + shift, None

    if x.shape[0] < 2:
        raise DegenerateBatchError(x.shape[0])
    count = int(np.prod([x.shape[a] for a in axes]))
    mean = x.mean(axis=axes)
    centred = x - mean.reshape(shape)
    var = (centred**2).mean(axis=axes)
    inv_std = 1.0 / np.sqrt(var + epsilon)
    normalized = centred * inv_std.reshape(shape)
    out = gamma.reshape(shape) * normalized + beta.reshape(shape)
    if update_stats:
        running_mean *= momentum
        running_mean += (1 - momentum) * mean
        running_var *= momentum
        running_var += (1 - momentum) * var * count / (count - 1)
    return out, BatchNormCache(normalized, inv_std, gamma, axes, count)


def batchnorm_backward(dout: np.ndarray, cache: BatchNormCache) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dgamma, dbeta)."""
    _, shape = _bn_axes(dout)
    axes, count, normalized = cache.axes, cache.count, cache.normalized
    dbeta = dout.sum(axis=axes)
    dgamma = (dout * normalized).sum(axis=axes)
    dnormalized = dout * cache.gamma.reshape(shape)
    dx = (
        cache.inv_std.reshape(shape)
        / count
        * (
            count * dnormalized
            - dnormalized.sum(axis=axes).reshape(shape)
            - normalized * (dnormalized * normalized).sum(axis=axes).reshape(shape)
        )
    )
    return dx, dgamma, dbeta


# pooling
@dataclass
class PoolCache:
    input_shape: tuple[int, ...]
    kind: PoolKind
    window: int
    stride: int
    argmax: np.ndarray | None


def pool2d_forward(x: np.ndarray, kind: PoolKind, window: int = 2, stride: int = 2) -> tuple[np.ndarray, PoolCache]:
    """Max or mean over window x window patches. Max ties go to the first index in row-major order."""
    if x.ndim != 4:
        raise ShapeMismatchError("pool2d", "(N, C, H, W)", x.shape)
    rows = _output_side(x.shape[2], window, stride, 0, "pool2d")
    cols = _output_side(x.shape[3], window, stride, 0, "pool2d")
    windows = sliding_window_view(x, (window, window), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :rows, :cols]
    flat = windows.reshape(*windows.shape[:4], window * window)
    if kind == "max":
        argmax = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]
        return out, PoolCache(x.shape, kind, window, stride, argmax)
    if kind == "avg":
        return flat.mean(axis=-1), PoolCache(x.shape, kind, window, stride, None)
    msg = f"unknown pooling kind {kind!r}"
    raise ValueError(msg)


def pool2d_backward(dout: np.ndarray, cache: PoolCache) -> np.ndarray:
    dx = np.zeros(cache.input_shape, dtype=dout.dtype)
    window, stride = cache.window, cache.stride
    rows, cols = dout.shape[2], dout.shape[3]
    for i in range(window):
        for j in range(window):
            target = _strided(dx, i, j, stride, rows, cols)
            if cache.kind == "max":
                assert cache.argmax is not None
                target += dout * (cache.argmax == i * window + j)
            else:
                target += dout / (window * window)
    return dx


# dense, activations, dropout
def fc_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeMismatchError("fc", f"(N, {weight.shape[0]})", x.shape)
    if bias.shape != (weight.shape[1],):
        raise ShapeMismatchError("fc bias", (weight.shape[1],), bias.shape)
    return x @ weight + bias, (x, weight)


def fc_backward(dout: np.ndarray, cache: tuple[np.ndarray, np.ndarray]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x, weight = cache
    return dout @ weight.T, x.T @ dout, dout.sum(axis=0)


def relu_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mask = x > 0
    return np.where(mask, x, x.dtype.type(0)), mask


def relu_backward(dout: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return dout * mask


def relu(x: np.ndarray) -> np.ndarray:
    return relu_forward(x)[0]


def dropout_forward(
    x: np.ndarray,
    rate: float,
    train: bool,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout: survivors are scaled by 1 / (1 - rate), infer mode is the identity."""
    if not 0 <= rate < 1:
        msg = f"dropout rate must be in [0, 1), got {rate}"
        raise ValueError(msg)
    if not train or rate == 0:
        return x, None
    rng = rng if rng is not None else np.random.default_rng()
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / x.dtype.type(1 - rate)
    return x * mask, mask


def dropout_backward(dout: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    return dout if mask is None else dout * mask


# softmax and loss
def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax_cross_entropy(
    logits: np.ndarray,
    labels: np.ndarray | int,
    class_weights: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """
    Mean cross-entropy over the batch and its gradient w.r.t. the logits.

    A single logit vector with a scalar label is treated as a batch of one, so its gradient is
    softmax(logits) - one_hot(label). Optional class weights scale each sample's term.
    """
    single = logits.ndim == 1
    batch_logits = logits[None, :] if single else logits
    batch_labels = np.atleast_1d(np.asarray(labels))
    n, classes = batch_logits.shape
    if batch_labels.shape != (n,):
        raise ShapeMismatchError("softmax_cross_entropy labels", (n,), batch_labels.shape)
    for label in batch_labels:
        if not 0 <= int(label) < classes:
            raise InvalidLabelError(int(label), classes)

    log_probs = log_softmax(batch_logits)
    rows = np.arange(n)
    weights = (
        np.ones(n, dtype=batch_logits.dtype)
        if class_weights is None
        else np.asarray(class_weights, dtype=batch_logits.dtype)[batch_labels]
    )
    loss = float(-(weights * log_probs[rows, batch_labels]).sum() / n)
    grad = np.exp(log_probs)
    grad[rows, batch_labels] -= 1
    grad *= (weights / n)[:, None]
    return loss, grad[0] if single else grad
