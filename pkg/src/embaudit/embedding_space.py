"""Geometry over embedding spaces."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .embedding_io import EmbeddingSpace


class ZeroVarianceError(ValueError):
    def __init__(self, coordinate: int):
        self.coordinate = coordinate
        super().__init__(f"coordinate {coordinate} has zero variance across the vocabulary")


class EmptyIntersectionError(ValueError):
    pass


def standardize(space: EmbeddingSpace, *, chunk_rows: int = 65536) -> EmbeddingSpace:
    """Z-score every coordinate across the vocabulary (population standard deviation).

    Statistics are accumulated in row chunks with a two-pass scheme so large
    spaces do not allocate extra full-size temporaries.
    """
    m = space.matrix
    n = m.shape[0]
    if n < 2:
        raise ValueError("standardization needs at least two words")
    mean = np.zeros(m.shape[1])
    for lo in range(0, n, chunk_rows):
        mean += m[lo:lo + chunk_rows].sum(axis=0)
    mean /= n
    ss = np.zeros(m.shape[1])
    for lo in range(0, n, chunk_rows):
        block = m[lo:lo + chunk_rows] - mean
        ss += np.einsum("ij,ij->j", block, block)
    std = np.sqrt(ss / n)
    scale = np.abs(mean) + 1.0
    bad = np.flatnonzero(std <= 1e-12 * scale)
    if bad.size:
        raise ZeroVarianceError(int(bad[0]))
    out = np.empty_like(m)
    for lo in range(0, n, chunk_rows):
        np.subtract(m[lo:lo + chunk_rows], mean, out=out[lo:lo + chunk_rows])
        out[lo:lo + chunk_rows] /= std
    return EmbeddingSpace(space.name, space.vocab, out, standardized=True)


def _unit(v: np.ndarray, what: str) -> np.ndarray:
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError(f"zero vector for {what}")
    return v / norm


def cosine(space: EmbeddingSpace, w1: str, w2: str) -> float:
    u = _unit(space.vector(w1), w1)
    v = _unit(space.vector(w2), w2)
    return float(np.clip(u @ v, -1.0, 1.0))


def cosine_matrix(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Pairwise cosines between the rows of ``left`` and the rows of ``right``."""
    return _unit(left, "left operand") @ _unit(right, "right operand").T


def nearest_neighbors(space: EmbeddingSpace, seed: str, k: int = 50,
                      *, chunk_rows: int = 65536) -> list[tuple[str, float]]:
    """The ``k`` words most cosine-similar to ``seed`` (seed excluded).

    Ties keep vocabulary order.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if k >= len(space):
        raise ValueError(f"k={k} must be smaller than the vocabulary size {len(space)}")
    s = space.index(seed)
    q = _unit(space.matrix[s], seed)
    m = space.matrix
    sims = np.empty(len(space))
    for lo in range(0, len(space), chunk_rows):
        block = m[lo:lo + chunk_rows]
        norms = np.linalg.norm(block, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            sims[lo:lo + chunk_rows] = (block @ q) / norms
    sims[~np.isfinite(sims)] = -np.inf
    sims[s] = -np.inf
    if k < len(space) - 1:
        # candidate pool must include every word tied with the k-th value
        kth = np.partition(sims, len(sims) - k)[len(sims) - k]
        cand = np.flatnonzero(sims >= kth)
    else:
        cand = np.flatnonzero(np.arange(len(sims)) != s)
    order = cand[np.lexsort((cand, -sims[cand]))][:k]
    return [(space.vocab[i], float(min(sims[i], 1.0))) for i in order]


@dataclass(frozen=True)
class AlignedPair:
    """Two spaces restricted to their shared vocabulary, rows in the same order."""

    space_a: EmbeddingSpace
    space_b: EmbeddingSpace
    dropped_a: int = 0
    dropped_b: int = 0
    shared_vocab: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        if self.space_a.vocab != self.space_b.vocab:
            raise ValueError("aligned spaces must share an identically ordered vocabulary")
        object.__setattr__(self, "shared_vocab", self.space_a.vocab)

    def swapped(self) -> "AlignedPair":
        return AlignedPair(self.space_b, self.space_a, self.dropped_b, self.dropped_a)


def _restrict(space: EmbeddingSpace, words: Sequence[str]) -> EmbeddingSpace:
    if tuple(words) == space.vocab:
        return space
    idx = np.fromiter((space.index(w) for w in words), dtype=np.intp, count=len(words))
    return EmbeddingSpace(space.name, tuple(words), space.matrix[idx], space.standardized)


def intersect_vocab(a: EmbeddingSpace, b: EmbeddingSpace) -> AlignedPair:
    """Restrict both spaces to the words they share, ordered as in ``a``."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.name} has {a.dim}, {b.name} has {b.dim}")
    if a.vocab == b.vocab:
        return AlignedPair(a, b, 0, 0)
    shared = [w for w in a.vocab if w in b]
    if not shared:
        raise EmptyIntersectionError(f"{a.name} and {b.name} share no vocabulary")
    return AlignedPair(_restrict(a, shared), _restrict(b, shared),
                       len(a) - len(shared), len(b) - len(shared))


@dataclass(frozen=True)
class AveragedVector:
    vector: np.ndarray
    n_used: int
    oov_count: int


def average_vectors(space: EmbeddingSpace, words: Sequence[str]) -> AveragedVector:
    """Mean of the in-vocabulary word vectors; repeated tokens count repeatedly."""
    idx = [space._index[w] for w in words if w in space]
    if not idx:
        raise KeyError("none of the words are in the vocabulary")
    vec = space.matrix[idx].mean(axis=0)
    return AveragedVector(vec, len(idx), len(words) - len(idx))
