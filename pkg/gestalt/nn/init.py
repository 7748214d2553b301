from __future__ import annotations

import numpy as np

Seed = int | np.random.Generator


def _rng(seed: Seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def fans(shape: tuple[int, ...]) -> tuple[int, int]:
    """(fan_in, fan_out) for a dense (in, out) or conv (out, in, kh, kw) weight"""
    if any(d <= 0 for d in shape):
        msg = f"weight dimensions must be positive, got {shape}"
        raise ValueError(msg)
    if len(shape) == 2:
        return shape[0], shape[1]
    if len(shape) == 4:
        receptive = shape[2] * shape[3]
        return shape[1] * receptive, shape[0] * receptive
    msg = f"cannot compute fans for shape {shape}"
    raise ValueError(msg)


def init_he_normal(shape: tuple[int, ...], seed: Seed, dtype: type[np.floating] = np.float64) -> np.ndarray:
    """Zero-mean normal with variance 2 / fan_in"""
    fan_in, _ = fans(shape)
    return _rng(seed).normal(0.0, np.sqrt(2.0 / fan_in), size=shape).astype(dtype)


def init_xavier_modified(
    shape: tuple[int, ...],
    scale: float = 0.3,
    seed: Seed = 0,
    dtype: type[np.floating] = np.float64,
) -> np.ndarray:
    """Zero-mean normal with variance scale * 2 / (fan_in + fan_out)"""
    if scale < 0:
        msg = f"scale must be >= 0, got {scale}"
        raise ValueError(msg)
    fan_in, fan_out = fans(shape)
    if scale == 0:
        return np.zeros(shape, dtype=dtype)
    return _rng(seed).normal(0.0, np.sqrt(scale * 2.0 / (fan_in + fan_out)), size=shape).astype(dtype)
