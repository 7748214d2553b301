"""
Label-permutation significance test for top-K accuracy.

Predictions stay fixed and the test labels are shuffled. Draws are processed in chunks; chunk i
uses its own generator spawned from `SeedSequence(seed)`, so the result depends only on the seed,
the draw count and the chunk size, whatever order the chunks run in.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel

from gestalt.ensemble import RankedList
from gestalt.errors import LengthMismatchError

DEFAULT_DRAWS = 1_000_000
DEFAULT_CHUNK = 10_000
EXHAUSTIVE_LIMIT = 8


class PermutationResult(BaseModel):
    k: int
    observed: float
    mean: float
    sd: float
    p_value: float
    draws: int


def membership_matrix(ranked_lists: Sequence[RankedList], labels: Sequence[str], k: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Returns (M, label_index): M[i, c] says class c is in sample i's top k. Labels outside every
    ranked list map to a trailing all-False column.
    """
    if len(ranked_lists) != len(labels):
        raise LengthMismatchError("ranked lists vs labels", len(ranked_lists), len(labels))
    if k < 1:
        msg = f"k must be >= 1, got {k}"
        raise ValueError(msg)
    universe = list(dict.fromkeys([*(label for ranked in ranked_lists for label in ranked.labels), *labels]))
    index = {label: i for i, label in enumerate(universe)}
    membership = np.zeros((len(labels), len(universe)), dtype=bool)
    for row, ranked in enumerate(ranked_lists):
        membership[row, [index[label] for label in ranked.top(k)]] = True
    return membership, np.array([index[label] for label in labels], dtype=np.int64)


def permutation_test(
    ranked_lists: Sequence[RankedList],
    labels: Sequence[str],
    k: int,
    draws: int = DEFAULT_DRAWS,
    seed: int = 0,
    chunk: int = DEFAULT_CHUNK,
) -> PermutationResult:
    """
    Null distribution of top-k accuracy under uniformly permuted labels.

    p-value = (1 + #{draws with accuracy >= observed}) / (draws + 1), so it is never 0. The sd is
    the sample standard deviation of the permuted accuracies.
    """
    if draws < 1:
        msg = f"draws must be >= 1, got {draws}"
        raise ValueError(msg)
    membership, label_index = membership_matrix(ranked_lists, labels, k)
    n = len(labels)
    if n == 0:
        return PermutationResult(k=k, observed=0.0, mean=0.0, sd=0.0, p_value=1.0, draws=draws)
    rows = np.arange(n)
    observed_hits = int(membership[rows, label_index].sum())

    chunks = math.ceil(draws / chunk)
    hit_counts = np.empty(draws, dtype=np.int64)
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(chunks)):
        size = min(chunk, draws - i * chunk)
        rng = np.random.default_rng(child)
        permuted = rng.permuted(np.broadcast_to(label_index, (size, n)), axis=1)
        hit_counts[i * chunk : i * chunk + size] = membership[rows, permuted].sum(axis=1)

    accuracies = hit_counts / n
    return PermutationResult(
        k=k,
        observed=observed_hits / n,
        mean=float(accuracies.mean()),
        sd=float(accuracies.std(ddof=1)) if draws > 1 else 0.0,
        p_value=(1 + int(np.sum(hit_counts >= observed_hits))) / (draws + 1),
        draws=draws,
    )


def expected_permuted_accuracy(ranked_lists: Sequence[RankedList], labels: Sequence[str], k: int) -> float:
    """Exact mean accuracy over all label permutations: (1/N^2) sum_i sum_{c in topK(i)} n_c"""
    membership, label_index = membership_matrix(ranked_lists, labels, k)
    n = len(labels)
    if n == 0:
        return 0.0
    class_counts = np.bincount(label_index, minlength=membership.shape[1])
    return float((membership * class_counts).sum() / n**2)


def exhaustive_permutation_accuracies(ranked_lists: Sequence[RankedList], labels: Sequence[str], k: int) -> np.ndarray:
    """Accuracy under every one of the N! orderings of the labels. Small N only."""
    membership, label_index = membership_matrix(ranked_lists, labels, k)
    n = len(labels)
    if n > EXHAUSTIVE_LIMIT:
        msg = f"exhaustive enumeration is limited to {EXHAUSTIVE_LIMIT} samples, got {n}"
        raise ValueError(msg)
    rows = np.arange(n)
    permutations = np.array(list(itertools.permutations(label_index)), dtype=np.int64).reshape(-1, n)
    return membership[rows, permutations].sum(axis=1) / n
