"""Translation-based knowledge embeddings (TransE) for concepts and relations.

Concept and base-relation rows are trained by per-triple SGD on a margin
ranking loss against uniformly corrupted negatives. The finished relation
table covers base and inverse ids, where the inverse row is the negation of
the base row, so traversing a triple backwards scores identically to the
forward triple.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .errors import DataError
from .kgstore import KnowledgeGraph

_NORM_EPS = 1e-12


@dataclass
class TransEConfig:
    dim: int = 100
    margin: float = 1.0
    learning_rate: float = 0.01
    epochs: int = 100
    negatives_per_positive: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


class EmbeddingTable:
    """Named dense rows; data is (rows, dim) float64."""

    def __init__(self, names: list[str], data: np.ndarray) -> None:
        if data.ndim != 2 or data.shape[0] != len(names):
            raise ValueError("data shape does not match name count")
        self.names = names
        self.data = np.asarray(data, dtype=np.float64)
        self.index = {n: i for i, n in enumerate(names)}

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def vec(self, idx: int) -> np.ndarray:
        if not 0 <= idx < self.rows:
            raise ValueError(f"embedding row {idx} out of range")
        return self.data[idx]


@dataclass
class TransEModel:
    """Trained concept and relation tables plus the margin used to train them."""

    concepts: EmbeddingTable
    relations: EmbeddingTable  # base rows then inverse rows (negated base)
    margin: float


def transe_distance(h_vec: np.ndarray, r_vec: np.ndarray, t_vec: np.ndarray) -> float:
    """L2 norm of h + r - t."""
    h_vec, r_vec, t_vec = (np.asarray(v, dtype=np.float64) for v in (h_vec, r_vec, t_vec))
    if not (h_vec.shape == r_vec.shape == t_vec.shape):
        raise ValueError("embedding dimension mismatch")
    return float(np.linalg.norm(h_vec + r_vec - t_vec))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return float(e / (1.0 + e))


def triple_validity(model: TransEModel, h: int, r: int, t: int) -> float:
    """sigmoid(margin - distance), in (0, 1); monotone decreasing in distance.

    r may be an inverse id; the stored negated row makes the score equal to
    the base triple's.
    """
    d = transe_distance(model.concepts.vec(h), model.relations.vec(r), model.concepts.vec(t))
    return _sigmoid(model.margin - d)


def _init_table(rng: np.random.Generator, rows: int, dim: int) -> np.ndarray:
    bound = 6.0 / np.sqrt(dim)
    return rng.uniform(-bound, bound, size=(rows, dim))


def _full_relation_table(g: KnowledgeGraph, base: np.ndarray) -> EmbeddingTable:
    names = list(g.relations.names) + [n + "^-1" for n in g.relations.names]
    return EmbeddingTable(names, np.concatenate([base, -base], axis=0))


def train_transe(g: KnowledgeGraph, cfg: TransEConfig) -> TransEModel:
    """Margin-ranking SGD over the graph's triples; deterministic per seed.

    Each positive is paired with uniformly sampled corruptions of the head or
    the tail. Concept rows are renormalized to unit L2 at the end of every
    epoch; with epochs=0 the tables are exactly the seeded uniform init.
    """
    if g.num_triples == 0:
        raise ValueError("cannot train embeddings on an empty graph")
    rng = np.random.default_rng(cfg.seed)
    ent = _init_table(rng, g.num_concepts, cfg.dim)
    rel = _init_table(rng, g.num_relations, cfg.dim)
    triples = np.array([(t.head, t.rel, t.tail) for t in g.triples], dtype=np.int64)
    n = len(triples)
    lr = cfg.learning_rate
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for idx in order:
            h, r, t = triples[idx]
            for _ in range(cfg.negatives_per_positive):
                corrupt_head = rng.random() < 0.5
                cand = int(rng.integers(g.num_concepts))
                nh, nt = (cand, t) if corrupt_head else (h, cand)
                pos_v = ent[h] + rel[r] - ent[t]
                neg_v = ent[nh] + rel[r] - ent[nt]
                pos_d = np.linalg.norm(pos_v)
                neg_d = np.linalg.norm(neg_v)
                if cfg.margin + pos_d - neg_d <= 0:
                    continue
                g_pos = pos_v / max(pos_d, _NORM_EPS)
                g_neg = neg_v / max(neg_d, _NORM_EPS)
                ent[h] -= lr * g_pos
                ent[t] += lr * g_pos
                ent[nh] += lr * g_neg
                ent[nt] -= lr * g_neg
                rel[r] -= lr * (g_pos - g_neg)
        norms = np.linalg.norm(ent, axis=1, keepdims=True)
        ent /= np.maximum(norms, _NORM_EPS)
    concepts = EmbeddingTable(list(g.concepts.names), ent)
    return TransEModel(concepts, _full_relation_table(g, rel), cfg.margin)


def export_table(table: EmbeddingTable, out: IO[str]) -> None:
    """Text export: header ``<rows> <dim>``, then one ``<name> <v1> ... <vd>`` per row."""
    out.write(f"{table.rows} {table.dim}\n")
    for name, row in zip(table.names, table.data):
        out.write(name + " " + " ".join(f"{v:.17g}" for v in row) + "\n")


def import_table(reader: Iterable[str]) -> EmbeddingTable:
    it = iter(reader)
    try:
        header = next(it)
    except StopIteration:
        raise DataError("empty embedding file") from None
    try:
        rows, dim = (int(x) for x in header.split())
    except ValueError:
        raise DataError(f"bad embedding header {header!r}") from None
    names: list[str] = []
    data = np.zeros((rows, dim))
    for i in range(rows):
        try:
            line = next(it)
        except StopIteration:
            raise DataError(f"embedding file truncated at row {i}") from None
        parts = line.split()
        if len(parts) != dim + 1:
            raise DataError(f"row {i}: expected name plus {dim} values")
        names.append(parts[0])
        try:
            data[i] = [float(x) for x in parts[1:]]
        except ValueError:
            raise DataError(f"row {i}: non-numeric embedding value") from None
    for extra in it:
        if extra.strip():
            raise DataError("embedding file has more rows than its header declares")
    if len(set(names)) != len(names):
        raise DataError("duplicate names in embedding file")
    return EmbeddingTable(names, data)
