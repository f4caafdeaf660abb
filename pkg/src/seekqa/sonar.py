"""Semantic-monitored path extraction and filtering over the knowledge graph.

For one question-candidate pair this grounds text spans to concepts,
enumerates simple link paths (up to 3 hops, bidirectional by default) between
question and answer concepts and between question-concept pairs, scores each
path on three aspects (link validity product, concept relevance, relation
relevance), keeps paths passing at least two of the three thresholds, and
gathers survivors into a knowledge subgraph.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import DataError
from .kge import TransEModel, triple_validity
from .kgstore import KnowledgeGraph
from .text import STOPWORDS, singular_variants, tokenize
from .wordvec import WordVectors, concept_rep, cosine, question_rep


@dataclass
class SonarConfig:
    max_hop: int = 2
    link_threshold: float = 0.15
    concept_threshold: float = 0.30
    relation_threshold: float = 0.35
    disable_semantic_constraints: bool = False
    disable_filtering: bool = False
    directed_only: bool = False
    path_cap: int | None = None  # surviving paths kept per concept pair

    def __post_init__(self) -> None:
        if not 1 <= self.max_hop <= 3:
            raise ValueError("max_hop must be in [1, 3]")
        for t in (self.link_threshold, self.concept_threshold, self.relation_threshold):
            if not np.isfinite(t):
                raise ValueError("thresholds must be finite")
        if self.path_cap is not None and self.path_cap < 1:
            raise ValueError("path_cap must be positive or None")


@dataclass(frozen=True)
class GroundedConcept:
    concept: int
    span: tuple[int, int]  # inclusive token indices


@dataclass(frozen=True)
class LinkPath:
    """Simple concept chain: nodes[i] --rels[i]--> nodes[i+1]; rels may be inverse ids."""

    nodes: tuple[int, ...]
    rels: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.nodes) != len(self.rels) + 1 or not self.rels:
            raise ValueError("path needs k relations joining k+1 concepts")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("path revisits a concept")

    @property
    def hops(self) -> int:
        return len(self.rels)

    @property
    def src(self) -> int:
        return self.nodes[0]

    @property
    def dst(self) -> int:
        return self.nodes[-1]


@dataclass(frozen=True)
class PathScores:
    link: float
    concept: float
    relation: float


@dataclass
class ScoredPath:
    path: LinkPath
    scores: PathScores


@dataclass
class PathGroup:
    """Paths sharing one (source concept, target concept) pair; never empty."""

    pair: tuple[int, int]
    kind: str  # "qa": question->answer, "qq": question->question
    paths: list[ScoredPath]

    def __post_init__(self) -> None:
        if not self.paths:
            raise ValueError("path group must be nonempty")
        if self.kind not in ("qa", "qq"):
            raise ValueError(f"unknown group kind {self.kind!r}")


@dataclass
class Subgraph:
    nodes: list[int]
    edges: list[tuple[int, int, int]]  # (head, base relation, tail)


@dataclass
class GroundedCandidate:
    """Extraction result for one question-candidate pair."""

    id: str
    q_concepts: list[GroundedConcept]
    a_concepts: list[GroundedConcept]
    groups: list[PathGroup]
    subgraph: Subgraph

    def qa_groups(self) -> list[PathGroup]:
        return [grp for grp in self.groups if grp.kind == "qa"]


def _vocab_lookup(g: KnowledgeGraph, tokens: Sequence[str]) -> int | None:
    cid = g.concepts.get("_".join(tokens))
    if cid is not None:
        return cid
    for variant in singular_variants(tokens[-1]):
        cid = g.concepts.get("_".join(list(tokens[:-1]) + [variant]))
        if cid is not None:
            return cid
    return None


def ground_concepts(text: str, g: KnowledgeGraph) -> list[GroundedConcept]:
    """Greedy longest-match grounding of normalized n-grams (n <= 4).

    Matched spans never overlap; single stopword tokens are never grounded.
    Spans are inclusive token indices into tokenize(text).
    """
    tokens = tokenize(text)
    out: list[GroundedConcept] = []
    i = 0
    while i < len(tokens):
        matched = False
        for n in range(min(4, len(tokens) - i), 0, -1):
            if n == 1 and tokens[i] in STOPWORDS:
                continue
            cid = _vocab_lookup(g, tokens[i:i + n])
            if cid is not None:
                out.append(GroundedConcept(cid, (i, i + n - 1)))
                i += n
                matched = True
                break
        if not matched:
            i += 1
    return out


def enumerate_paths(
    g: KnowledgeGraph,
    src: int,
    dst: int,
    max_hop: int,
    directed_only: bool = False,
) -> list[LinkPath]:
    """All simple paths src -> dst with at most max_hop edges, in DFS order.

    Traversal is bidirectional (reverse edges appear with inverse relation
    ids) unless directed_only is set.
    """
    if src == dst:
        raise ValueError("path endpoints must be distinct concepts")
    if not 1 <= max_hop <= 3:
        raise ValueError("max_hop must be in [1, 3]")
    if not 0 <= dst < g.num_concepts:
        raise ValueError(f"concept id {dst} out of range")
    out: list[LinkPath] = []
    nodes: list[int] = [src]
    rels: list[int] = []
    visited = {src}

    def walk(cur: int) -> None:
        depth = len(rels)
        for rel, nxt in g.neighbors(cur, directed_only):
            if nxt == dst:
                out.append(LinkPath(tuple(nodes) + (dst,), tuple(rels) + (rel,)))
            elif depth + 1 < max_hop and nxt not in visited:
                visited.add(nxt)
                nodes.append(nxt)
                rels.append(rel)
                walk(nxt)
                visited.remove(nxt)
                nodes.pop()
                rels.pop()

    walk(src)
    return out


def score_path(
    p: LinkPath,
    q_rep: np.ndarray,
    model: TransEModel,
    wv: WordVectors,
    g: KnowledgeGraph,
) -> PathScores:
    """Three-aspect path score.

    link: product of per-triple validity scores (inverse traversal scores the
    same as the base triple). concept: mean cosine between the question
    representation and each path concept's word-vector representation.
    relation: same, against each traversed relation's knowledge embedding
    (negated row for inverse traversal).
    """
    link = 1.0
    for i, rel in enumerate(p.rels):
        link *= float(triple_validity(model, p.nodes[i], rel, p.nodes[i + 1]))
    concept = float(np.mean([
        cosine(q_rep, concept_rep(g.concepts.name(c), wv)) for c in p.nodes
    ]))
    relation = float(np.mean([
        cosine(q_rep, model.relations.vec(rel)) for rel in p.rels
    ]))
    return PathScores(link=link, concept=concept, relation=relation)


def filter_paths(scored: Iterable[ScoredPath], cfg: SonarConfig) -> list[ScoredPath]:
    """Keep paths meeting at least two of the three thresholds.

    disable_semantic_constraints reduces the rule to the link threshold
    alone; disable_filtering keeps everything.
    """
    scored = list(scored)
    if cfg.disable_filtering:
        return scored
    kept = []
    for sp in scored:
        if cfg.disable_semantic_constraints:
            ok = sp.scores.link >= cfg.link_threshold
        else:
            checks = (
                sp.scores.link >= cfg.link_threshold,
                sp.scores.concept >= cfg.concept_threshold,
                sp.scores.relation >= cfg.relation_threshold,
            )
            ok = sum(1 for c in checks if c) >= 2
        if ok:
            kept.append(sp)
    return kept


def assemble_subgraph(paths: Iterable[ScoredPath], g: KnowledgeGraph) -> Subgraph:
    """Deduplicated union of path concepts and base-direction edges."""
    nodes: set[int] = set()
    edges: set[tuple[int, int, int]] = set()
    for sp in paths:
        p = sp.path
        nodes.update(p.nodes)
        for i, rel in enumerate(p.rels):
            a, b = p.nodes[i], p.nodes[i + 1]
            if g.is_inverse(rel):
                edges.add((b, g.base_rel(rel), a))
            else:
                edges.add((a, rel, b))
    return Subgraph(nodes=sorted(nodes), edges=sorted(edges))


def _apply_cap(paths: list[ScoredPath], cap: int | None) -> list[ScoredPath]:
    if cap is None or len(paths) <= cap:
        return paths
    ranked = sorted(paths, key=lambda sp: -sp.scores.link)  # stable for ties
    return ranked[:cap]


def _unique_ids(grounded: list[GroundedConcept]) -> list[int]:
    seen: list[int] = []
    for gc in grounded:
        if gc.concept not in seen:
            seen.append(gc.concept)
    return seen


def extract_candidate(
    pair_id: str,
    question: str,
    answer: str,
    g: KnowledgeGraph,
    model: TransEModel,
    wv: WordVectors,
    cfg: SonarConfig,
) -> GroundedCandidate:
    """Full extraction for one question-candidate pair.

    Question->answer path groups feed the downstream fusion; question->question
    groups only contribute edges to the subgraph.
    """
    q_concepts = ground_concepts(question, g)
    a_concepts = ground_concepts(answer, g)
    q_rep = question_rep(question, wv)
    q_ids = _unique_ids(q_concepts)
    a_ids = _unique_ids(a_concepts)

    def build_group(src: int, dst: int, kind: str) -> PathGroup | None:
        raw = enumerate_paths(g, src, dst, cfg.max_hop, cfg.directed_only)
        scored = [ScoredPath(p, score_path(p, q_rep, model, wv, g)) for p in raw]
        kept = _apply_cap(filter_paths(scored, cfg), cfg.path_cap)
        return PathGroup((src, dst), kind, kept) if kept else None

    groups: list[PathGroup] = []
    for m in q_ids:
        for n in a_ids:
            if m == n:
                continue
            grp = build_group(m, n, "qa")
            if grp is not None:
                groups.append(grp)
    for i, m in enumerate(q_ids):
        for m2 in q_ids[i + 1:]:
            grp = build_group(m, m2, "qq")
            if grp is not None:
                groups.append(grp)
    all_paths = [sp for grp in groups for sp in grp.paths]
    return GroundedCandidate(
        id=pair_id,
        q_concepts=q_concepts,
        a_concepts=a_concepts,
        groups=groups,
        subgraph=assemble_subgraph(all_paths, g),
    )


@dataclass
class PathStats:
    """Aggregate link-path statistics over a set of question-candidate pairs."""

    num_pairs: int = 0
    total_links: int = 0
    total_concept_pairs: int = 0
    avg_links_per_qa: float = 0.0
    avg_pairs_per_qa: float = 0.0
    avg_links_per_pair: float = 0.0


def path_stats(candidates: Iterable[GroundedCandidate]) -> PathStats:
    """Total and per-pair link counts over question->answer groups only."""
    n = 0
    links = 0
    pairs = 0
    for cand in candidates:
        n += 1
        for grp in cand.qa_groups():
            pairs += 1
            links += len(grp.paths)
    return PathStats(
        num_pairs=n,
        total_links=links,
        total_concept_pairs=pairs,
        avg_links_per_qa=links / n if n else 0.0,
        avg_pairs_per_qa=pairs / n if n else 0.0,
        avg_links_per_pair=links / pairs if pairs else 0.0,
    )


# -- JSON interchange ---------------------------------------------------------

def _grounded_to_json(gc: GroundedConcept, g: KnowledgeGraph) -> dict:
    return {"concept": g.concepts.name(gc.concept), "span": list(gc.span)}


def candidate_to_json(cand: GroundedCandidate, g: KnowledgeGraph) -> dict:
    groups = []
    for grp in cand.groups:
        paths = []
        for sp in grp.paths:
            paths.append({
                "concepts": [g.concepts.name(c) for c in sp.path.nodes],
                "relations": [g.relations.name(g.base_rel(r)) for r in sp.path.rels],
                "inverse_flags": [g.is_inverse(r) for r in sp.path.rels],
                "scores": {
                    "link": sp.scores.link,
                    "concept": sp.scores.concept,
                    "relation": sp.scores.relation,
                },
            })
        groups.append({
            "pair": [g.concepts.name(grp.pair[0]), g.concepts.name(grp.pair[1])],
            "kind": grp.kind,
            "paths": paths,
        })
    return {
        "id": cand.id,
        "q_concepts": [_grounded_to_json(gc, g) for gc in cand.q_concepts],
        "a_concepts": [_grounded_to_json(gc, g) for gc in cand.a_concepts],
        "groups": groups,
        "subgraph": {
            "nodes": [g.concepts.name(c) for c in cand.subgraph.nodes],
            "edges": [
                [g.concepts.name(h), g.relations.name(r), g.concepts.name(t)]
                for h, r, t in cand.subgraph.edges
            ],
        },
    }


def _concept_id(g: KnowledgeGraph, name: str, rec_id: str) -> int:
    cid = g.concepts.get(name)
    if cid is None:
        raise DataError(f"record {rec_id}: unknown concept {name!r}")
    return cid


def candidate_from_json(d: dict, g: KnowledgeGraph) -> GroundedCandidate:
    try:
        rec_id = d["id"]
        q_concepts = [
            GroundedConcept(_concept_id(g, e["concept"], rec_id), tuple(e["span"]))
            for e in d["q_concepts"]
        ]
        a_concepts = [
            GroundedConcept(_concept_id(g, e["concept"], rec_id), tuple(e["span"]))
            for e in d["a_concepts"]
        ]
        groups = []
        for grp in d["groups"]:
            paths = []
            for p in grp["paths"]:
                nodes = tuple(_concept_id(g, c, rec_id) for c in p["concepts"])
                rels = []
                for rel_name, inv in zip(p["relations"], p["inverse_flags"]):
                    rid = g.relations.get(rel_name)
                    if rid is None:
                        raise DataError(f"record {rec_id}: unknown relation {rel_name!r}")
                    rels.append(rid + g.num_relations if inv else rid)
                sc = p["scores"]
                paths.append(ScoredPath(
                    LinkPath(nodes, tuple(rels)),
                    PathScores(sc["link"], sc["concept"], sc["relation"]),
                ))
            groups.append(PathGroup(
                (_concept_id(g, grp["pair"][0], rec_id), _concept_id(g, grp["pair"][1], rec_id)),
                grp["kind"],
                paths,
            ))
        def rel_id(name: str) -> int:
            rid = g.relations.get(name)
            if rid is None:
                raise DataError(f"record {rec_id}: unknown relation {name!r}")
            return rid

        sub = d["subgraph"]
        subgraph = Subgraph(
            nodes=[_concept_id(g, c, rec_id) for c in sub["nodes"]],
            edges=[
                (_concept_id(g, h, rec_id), rel_id(r), _concept_id(g, t, rec_id))
                for h, r, t in sub["edges"]
            ],
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed extraction record: {exc}") from None
    return GroundedCandidate(rec_id, q_concepts, a_concepts, groups, subgraph)


def write_extractions(cands: Iterable[GroundedCandidate], g: KnowledgeGraph, out: IO[str]) -> None:
    for cand in cands:
        out.write(json.dumps(candidate_to_json(cand, g)) + "\n")


def read_extractions(reader: Iterable[str], g: KnowledgeGraph) -> list[GroundedCandidate]:
    out = []
    for line in reader:
        if line.strip():
            out.append(candidate_from_json(json.loads(line), g))
    return out
