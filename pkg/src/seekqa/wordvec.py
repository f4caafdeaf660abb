"""Pretrained word vectors (GloVe text format) and pooled representations.

The grounding-time semantic scores compare a mean-pooled question
representation against concept and relation vectors, so the word-vector
dimension must equal the knowledge-embedding dimension. The loader enforces
that; a fixed seeded random projection is available for mismatched files.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import DataError
from .text import tokenize

# Seed for the dimension-adapting projection; fixed so projected vectors are
# stable across runs and processes.
_PROJECTION_SEED = 74380591


class WordVectors:
    def __init__(self, words: list[str], data: np.ndarray) -> None:
        self.index = {w: i for i, w in enumerate(words)}
        self.data = np.asarray(data, dtype=np.float64)

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def vec(self, word: str) -> np.ndarray | None:
        idx = self.index.get(word)
        return None if idx is None else self.data[idx]


def load_word_vectors(
    reader: Iterable[str],
    expect_dim: int | None = None,
    project: bool = False,
) -> WordVectors:
    """Parse ``<word> <v1> ... <vd>`` lines.

    With expect_dim set, a file of different width is rejected unless project
    is true, in which case rows go through a fixed seeded Gaussian projection
    to expect_dim.
    """
    words: list[str] = []
    rows: list[list[float]] = []
    dim: int | None = None
    for lineno, line in enumerate(reader, start=1):
        parts = line.split()
        if not parts:
            continue
        if dim is None:
            dim = len(parts) - 1
            if dim <= 0:
                raise DataError(f"line {lineno}: no vector components")
        elif len(parts) != dim + 1:
            raise DataError(f"line {lineno}: expected {dim} components")
        words.append(parts[0])
        try:
            rows.append([float(x) for x in parts[1:]])
        except ValueError:
            raise DataError(f"line {lineno}: non-numeric component") from None
    if dim is None:
        raise DataError("empty word-vector file")
    data = np.asarray(rows, dtype=np.float64)
    if expect_dim is not None and dim != expect_dim:
        if not project:
            raise DataError(
                f"word vectors have dim {dim}, expected {expect_dim}; "
                "enable projection to adapt"
            )
        rng = np.random.default_rng(_PROJECTION_SEED)
        proj = rng.standard_normal((dim, expect_dim)) / np.sqrt(dim)
        data = data @ proj
    return WordVectors(words, data)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """u.v / (|u||v|); 0.0 when either vector is zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError("vector dimension mismatch")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def sentence_rep(tokens: list[str], wv: WordVectors) -> np.ndarray:
    """Mean of in-vocabulary token vectors; zero vector if none are known."""
    vecs = [wv.vec(t) for t in tokens]
    vecs = [v for v in vecs if v is not None]
    if not vecs:
        return np.zeros(wv.dim)
    return np.mean(vecs, axis=0)


def concept_rep(surface: str, wv: WordVectors) -> np.ndarray:
    """Mean of the concept's constituent word vectors ("hot_dog" -> hot, dog)."""
    return sentence_rep(surface.split("_"), wv)


def question_rep(question: str, wv: WordVectors) -> np.ndarray:
    """Mean-pooled representation of raw question text."""
    return sentence_rep(tokenize(question), wv)
