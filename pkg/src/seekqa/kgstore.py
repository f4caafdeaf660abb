"""Indexed ConceptNet-style triple store.

Concepts and relations are interned into integer vocabularies. Traversal is
bidirectional: a triple (h, r, t) is reachable from h as (r, t) and from t as
(r + R, h), where R is the base relation count. Ids in [R, 2R) are inverse
relations; they never appear inside stored triples, only in traversal results.

The graph is immutable once built and safe to share across workers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

from .errors import DataError
from .text import normalize_concept

SNAPSHOT_MAGIC = b"SEEKKG1"


@dataclass(frozen=True)
class Triple:
    head: int
    rel: int
    tail: int


class Vocab:
    """Bijective name <-> id mapping; ids are dense and insertion-ordered."""

    def __init__(self) -> None:
        self.names: list[str] = []
        self.index: dict[str, int] = {}

    def add(self, name: str) -> int:
        idx = self.index.get(name)
        if idx is None:
            idx = len(self.names)
            self.names.append(name)
            self.index[name] = idx
        return idx

    def get(self, name: str) -> int | None:
        return self.index.get(name)

    def name(self, idx: int) -> str:
        return self.names[idx]

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.index


class KnowledgeGraph:
    """Deduplicated triples plus forward/reverse adjacency indices."""

    def __init__(self, concepts: Vocab, relations: Vocab, triples: list[Triple]) -> None:
        self.concepts = concepts
        self.relations = relations
        self.triples = triples
        n = len(concepts)
        self.fwd_index: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        self.rev_index: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for t in triples:
            self.fwd_index[t.head].append((t.rel, t.tail))
            self.rev_index[t.tail].append((t.rel, t.head))
        r = len(relations)
        # Combined adjacency used by traversal: forward edges keep their base
        # relation id, reverse edges get the inverse id (base + R).
        self._adj: list[list[tuple[int, int]]] = [
            sorted(self.fwd_index[c] + [(rel + r, head) for rel, head in self.rev_index[c]])
            for c in range(n)
        ]
        for c in range(n):
            self.fwd_index[c].sort()
            self.rev_index[c].sort()

    @property
    def num_concepts(self) -> int:
        return len(self.concepts)

    @property
    def num_relations(self) -> int:
        """Base relation count; inverse ids run in [num_relations, 2*num_relations)."""
        return len(self.relations)

    @property
    def num_triples(self) -> int:
        return len(self.triples)

    def is_inverse(self, rel: int) -> bool:
        return rel >= len(self.relations)

    def base_rel(self, rel: int) -> int:
        r = len(self.relations)
        return rel - r if rel >= r else rel

    def invert_rel(self, rel: int) -> int:
        r = len(self.relations)
        return rel - r if rel >= r else rel + r

    def relation_label(self, rel: int) -> str:
        name = self.relations.name(self.base_rel(rel))
        return name + "^-1" if self.is_inverse(rel) else name

    def neighbors(self, c: int, directed_only: bool = False) -> list[tuple[int, int]]:
        """(relation id, concept id) pairs reachable from c, sorted.

        Forward edges carry base relation ids; reverse edges carry inverse ids,
        unless directed_only suppresses reverse traversal entirely.
        """
        if not 0 <= c < len(self.concepts):
            raise ValueError(f"concept id {c} out of range")
        return self.fwd_index[c] if directed_only else self._adj[c]


def _parse_tsv3(line: str) -> tuple[str, str, str]:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 3 or not all(p.strip() for p in parts):
        raise ValueError("expected relation<TAB>head<TAB>tail")
    rel, head, tail = parts
    return rel.strip(), head.strip(), tail.strip()


def _parse_conceptnet_csv(line: str) -> tuple[str, str, str] | None:
    """One assertion-dump row, or None for non-English rows."""
    parts = line.rstrip("\n").split("\t")
    if len(parts) < 4:
        raise ValueError("expected at least 4 tab-separated assertion fields")
    rel_uri, start_uri, end_uri = parts[1], parts[2], parts[3]
    if not (start_uri.startswith("/c/en/") and end_uri.startswith("/c/en/")):
        return None
    if not rel_uri.startswith("/r/"):
        raise ValueError(f"bad relation uri {rel_uri!r}")
    # Drop the sense/part-of-speech suffix: /c/en/cat/n -> cat
    head = start_uri[len("/c/en/"):].split("/")[0]
    tail = end_uri[len("/c/en/"):].split("/")[0]
    rel = rel_uri[len("/r/"):]
    if not head or not tail or not rel:
        raise ValueError("empty concept or relation after uri stripping")
    return rel, head, tail


def load_triples(reader: Iterable[str], format: str = "tsv3") -> KnowledgeGraph:
    """Build a graph from a line stream.

    tsv3 lines are ``relation<TAB>head<TAB>tail``; conceptnet_csv is the raw
    assertion dump, of which only /c/en/ rows are kept. Exact duplicates are
    dropped, multi-edges (same endpoints, different relation) are all kept.
    """
    if format not in ("tsv3", "conceptnet_csv"):
        raise ValueError(f"unknown triple format {format!r}")
    concepts = Vocab()
    relations = Vocab()
    triples: list[Triple] = []
    seen: set[tuple[int, int, int]] = set()
    for lineno, line in enumerate(reader, start=1):
        if not line.strip():
            continue
        try:
            if format == "tsv3":
                row = _parse_tsv3(line)
            else:
                row = _parse_conceptnet_csv(line)
                if row is None:
                    continue
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
        rel, head, tail = row
        h = concepts.add(normalize_concept(head))
        t = concepts.add(normalize_concept(tail))
        r = relations.add(rel)
        key = (h, r, t)
        if key not in seen:
            seen.add(key)
            triples.append(Triple(h, r, t))
    if not triples:
        raise DataError("no triples in input")
    return KnowledgeGraph(concepts, relations, triples)


def _write_str(out: IO[bytes], s: str) -> None:
    data = s.encode("utf-8")
    out.write(struct.pack("<I", len(data)))
    out.write(data)


def _read_str(data: bytes, off: int) -> tuple[str, int]:
    (n,) = struct.unpack_from("<I", data, off)
    off += 4
    return data[off:off + n].decode("utf-8"), off + n


def save_snapshot(g: KnowledgeGraph, out: IO[bytes]) -> None:
    """Binary snapshot; round-trips bit-exactly through load_snapshot."""
    out.write(SNAPSHOT_MAGIC)
    out.write(struct.pack("<III", g.num_concepts, g.num_relations, g.num_triples))
    for name in g.concepts.names:
        _write_str(out, name)
    for name in g.relations.names:
        _write_str(out, name)
    for t in g.triples:
        out.write(struct.pack("<III", t.head, t.rel, t.tail))


def load_snapshot(inp: IO[bytes]) -> KnowledgeGraph:
    data = inp.read()
    if data[: len(SNAPSHOT_MAGIC)] != SNAPSHOT_MAGIC:
        raise DataError("not a graph snapshot (bad magic)")
    try:
        off = len(SNAPSHOT_MAGIC)
        n_c, n_r, n_t = struct.unpack_from("<III", data, off)
        off += 12
        concepts = Vocab()
        relations = Vocab()
        for _ in range(n_c):
            name, off = _read_str(data, off)
            concepts.add(name)
        for _ in range(n_r):
            name, off = _read_str(data, off)
            relations.add(name)
        triples = []
        for _ in range(n_t):
            h, r, t = struct.unpack_from("<III", data, off)
            off += 12
            triples.append(Triple(h, r, t))
    except (struct.error, UnicodeDecodeError) as exc:
        raise DataError(f"snapshot truncated or corrupt: {exc}") from None
    if off != len(data):
        raise DataError("snapshot has trailing bytes")
    if len(concepts) != n_c or len(relations) != n_r:
        raise DataError("duplicate vocabulary entries in snapshot")
    for t in triples:
        if not (0 <= t.head < n_c and 0 <= t.tail < n_c and 0 <= t.rel < n_r):
            raise DataError("snapshot triple references an id outside its vocabulary")
    return KnowledgeGraph(concepts, relations, triples)


def iter_lines(path: str) -> Iterator[str]:
    with open(path, "r", encoding="utf-8") as fh:
        yield from fh
