"""Word-vector training from windowed co-occurrence counts.

Counts are collected symmetrically over a fixed window with 1/distance
weighting, then word and context vectors plus biases are fitted by
minimizing the weighted least-squares objective

    J = 1/2 * sum_ij f(X_ij) (w_i . c_j + b_i + b_j - log X_ij)^2,
    f(x) = min(1, (x / x_max)^alpha)

with per-coordinate adaptive-gradient updates over shuffled nonzero
entries.  The returned embedding for a word is the sum of its word and
context vectors.  Training is single-threaded and deterministic for a
fixed seed.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .embeddings import PRETRAINED, EmbeddingTable
from .errors import DataError


@dataclass(frozen=True)
class GloveParams:
    dim: int = 50
    window: int = 10
    x_max: float = 100.0
    alpha: float = 0.75
    learning_rate: float = 0.05
    iterations: int = 50
    min_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.window < 1 or self.iterations < 1:
            raise ValueError("dim, window, and iterations must be positive")
        if self.x_max <= 0 or self.learning_rate <= 0:
            raise ValueError("x_max and learning_rate must be positive")


def count_vocabulary(corpus: Iterable[Sequence[str]], min_count: int) -> list[str]:
    counts = Counter()
    for sentence in corpus:
        counts.update(sentence)
    kept = [w for w, c in counts.items() if c >= min_count]
    # frequency-descending, ties alphabetic: stable across runs
    kept.sort(key=lambda w: (-counts[w], w))
    return kept


def build_cooccurrence(
    corpus: Iterable[Sequence[str]], index: dict[str, int], window: int
) -> dict[tuple[int, int], float]:
    """Symmetric windowed counts with 1/distance weighting.

    Windows do not cross sentence boundaries.  Words missing from
    ``index`` are skipped but still occupy positions (distance is
    positional, not filtered).
    """
    counts: dict[tuple[int, int], float] = {}
    for sentence in corpus:
        ids = [index.get(w) for w in sentence]
        for pos, wid in enumerate(ids):
            if wid is None:
                continue
            for dist in range(1, window + 1):
                other = pos + dist
                if other >= len(ids):
                    break
                oid = ids[other]
                if oid is None:
                    continue
                weight = 1.0 / dist
                counts[(wid, oid)] = counts.get((wid, oid), 0.0) + weight
                counts[(oid, wid)] = counts.get((oid, wid), 0.0) + weight
    return counts


def _weights(x: np.ndarray, x_max: float, alpha: float) -> np.ndarray:
    return np.minimum(1.0, (x / x_max) ** alpha)


def fit_glove(
    corpus: Iterable[Sequence[str]], params: GloveParams
) -> tuple[EmbeddingTable, list[float]]:
    """Train embeddings; returns the table and the per-iteration objective."""
    sentences = [list(s) for s in corpus]
    vocab = count_vocabulary(sentences, params.min_count)
    if not vocab:
        raise DataError("corpus is empty after minimum-count filtering")
    index = {w: i for i, w in enumerate(vocab)}
    cooc = build_cooccurrence(sentences, index, params.window)
    if not cooc:
        raise DataError("no co-occurrence pairs; corpus may be all length-1 sentences")

    n = len(vocab)
    pairs = np.array(sorted(cooc), dtype=np.int64)
    xs = np.array([cooc[tuple(p)] for p in pairs], dtype=np.float64)
    logx = np.log(xs)
    fx = _weights(xs, params.x_max, params.alpha)

    rng = np.random.default_rng(params.seed)
    scale = 0.5 / (params.dim + 1)
    vectors = rng.uniform(-scale, scale, (2 * n, params.dim))
    biases = rng.uniform(-scale, scale, 2 * n)
    grad_sq_vec = np.ones_like(vectors)
    grad_sq_bias = np.ones_like(biases)

    word_ids = pairs[:, 0]
    ctx_ids = pairs[:, 1] + n
    lr = params.learning_rate

    def objective() -> float:
        dots = np.einsum("ij,ij->i", vectors[word_ids], vectors[ctx_ids])
        diff = dots + biases[word_ids] + biases[ctx_ids] - logx
        return float(0.5 * np.sum(fx * diff * diff))

    history: list[float] = []
    for _ in range(params.iterations):
        for k in rng.permutation(len(pairs)):
            i, j = word_ids[k], ctx_ids[k]
            wi, wj = vectors[i], vectors[j]
            diff = wi @ wj + biases[i] + biases[j] - logx[k]
            fdiff = fx[k] * diff
            grad_i = fdiff * wj
            grad_j = fdiff * wi
            vectors[i] -= lr * grad_i / np.sqrt(grad_sq_vec[i])
            vectors[j] -= lr * grad_j / np.sqrt(grad_sq_vec[j])
            grad_sq_vec[i] += grad_i * grad_i
            grad_sq_vec[j] += grad_j * grad_j
            biases[i] -= lr * fdiff / np.sqrt(grad_sq_bias[i])
            biases[j] -= lr * fdiff / np.sqrt(grad_sq_bias[j])
            grad_sq_bias[i] += fdiff * fdiff
            grad_sq_bias[j] += fdiff * fdiff
        history.append(objective())

    entries = {w: vectors[i] + vectors[i + n] for w, i in index.items()}
    table = EmbeddingTable(params.dim, entries, {w: PRETRAINED for w in vocab})
    return table, history


def train_glove(corpus: Iterable[Sequence[str]], params: GloveParams) -> EmbeddingTable:
    table, _ = fit_glove(corpus, params)
    return table
