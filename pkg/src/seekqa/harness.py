"""End-to-end wiring: datasets, input assembly, training, and evaluation.

This module turns raw question files plus extraction and encoding records
into scorer inputs, runs the Adam training loop, and writes predictions. It
also builds a small synthetic fixture whose gold answers are decidable from
the knowledge graph alone, used by the regression suite to show that the
knowledge path carries signal the text summary does not.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .encoder import SEPARATOR_TOKEN, ContextualEncoding, stub_encode
from .errors import DataError
from .kge import TransEConfig, TransEModel, train_transe
from .kgstore import KnowledgeGraph, load_triples
from .sketch import (
    Ablation,
    CandidateInput,
    GroupInput,
    ModelDims,
    PathInput,
    SketchModel,
    batch_loss,
    instance_probs,
)
from .sonar import GroundedCandidate, SonarConfig, extract_candidate
from .wordvec import WordVectors, load_word_vectors

DEFAULT_LABELS = ("A", "B", "C", "D", "E")
NUM_CANDIDATES = 5


@dataclass
class QAInstance:
    id: str
    question: str
    candidates: list[str]
    gold: int | None = None  # candidate index, None when unlabeled
    labels: tuple[str, ...] = DEFAULT_LABELS

    def __post_init__(self) -> None:
        if len(self.candidates) != NUM_CANDIDATES:
            raise DataError(
                f"instance {self.id!r}: expected {NUM_CANDIDATES} candidates, "
                f"got {len(self.candidates)}"
            )
        if len(self.labels) != NUM_CANDIDATES:
            raise DataError(f"instance {self.id!r}: expected {NUM_CANDIDATES} labels")
        if self.gold is not None and not 0 <= self.gold < NUM_CANDIDATES:
            raise DataError(f"instance {self.id!r}: gold index {self.gold} out of range")

    def pair_id(self, k: int) -> str:
        return f"{self.id}|{k}"


# -- dataset loading ----------------------------------------------------------

def _load_choices_jsonl(reader: Iterable[str]) -> list[QAInstance]:
    out = []
    for lineno, line in enumerate(reader, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"dataset line {lineno}: invalid JSON: {exc}") from None
        try:
            rec_id = str(rec["id"])
            stem = str(rec["question"]["stem"])
            choices = rec["question"]["choices"]
            labels = [str(c["label"]) for c in choices]
            texts = [str(c["text"]) for c in choices]
        except (KeyError, TypeError) as exc:
            raise DataError(f"dataset line {lineno}: missing field {exc}") from None
        gold = None
        if "answerKey" in rec and rec["answerKey"] is not None:
            key = str(rec["answerKey"])
            if key not in labels:
                raise DataError(
                    f"dataset line {lineno}: answer key {key!r} not among labels {labels}"
                )
            gold = labels.index(key)
        out.append(QAInstance(rec_id, stem, texts, gold, tuple(labels)))
    return out


def _load_simple_tsv(reader: Iterable[str]) -> list[QAInstance]:
    out = []
    for lineno, raw in enumerate(reader, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) not in (7, 8):
            raise DataError(
                f"dataset line {lineno}: expected 7 or 8 tab-separated columns, "
                f"got {len(cols)}"
            )
        gold = None
        if len(cols) == 8 and cols[7] != "":
            key = cols[7].strip()
            if key in DEFAULT_LABELS:
                gold = DEFAULT_LABELS.index(key)
            elif key.isdigit() and 0 <= int(key) < NUM_CANDIDATES:
                gold = int(key)
            else:
                raise DataError(f"dataset line {lineno}: bad answer key {key!r}")
        out.append(QAInstance(cols[0], cols[1], cols[2:7], gold))
    return out


def load_dataset(reader: Iterable[str], fmt: str = "choices_jsonl") -> list[QAInstance]:
    """Read five-way multiple choice questions.

    choices_jsonl: one JSON object per line with id, question.stem,
    question.choices (label plus text), optional answerKey. simple_tsv:
    id, question, five candidates, optional gold (letter or index).
    """
    if fmt == "choices_jsonl":
        items = _load_choices_jsonl(reader)
    elif fmt == "simple_tsv":
        items = _load_simple_tsv(reader)
    else:
        raise ValueError(f"unknown dataset format {fmt!r}")
    if not items:
        raise DataError("no instances in dataset")
    return items


def split_dataset(
    instances: Sequence[QAInstance], fraction: float = 0.6, seed: int = 0
) -> tuple[list[QAInstance], list[QAInstance]]:
    """Seeded shuffle then split; the first floor(n * fraction) go to train."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    order = np.random.default_rng(seed).permutation(len(instances))
    cut = int(len(instances) * fraction)
    train = [instances[i] for i in order[:cut]]
    heldout = [instances[i] for i in order[cut:]]
    return train, heldout


# -- scorer input assembly ----------------------------------------------------

def _first_span(grounded, concept: int) -> tuple[int, int]:
    for gc in grounded:
        if gc.concept == concept:
            return gc.span
    raise ValueError(f"concept {concept} has no grounded mention")


def build_candidate_input(
    extraction: GroundedCandidate,
    enc: ContextualEncoding,
    concept_table: np.ndarray,
    dims: ModelDims,
) -> CandidateInput:
    """Join one extraction record with its contextual encoding.

    The encoding token layout is question tokens, separator, answer tokens;
    answer-side spans are shifted past the separator before pooling.
    """
    if concept_table.shape[1] != dims.d_g:
        raise ValueError(
            f"concept embedding width {concept_table.shape[1]} != d_g {dims.d_g}"
        )
    if enc.d_h != dims.d_h:
        raise DataError(f"record {enc.id}: encoder width {enc.d_h} != d_h {dims.d_h}")
    try:
        sep = enc.tokens.index(SEPARATOR_TOKEN)
    except ValueError:
        raise DataError(f"record {enc.id}: no separator token in encoding") from None

    def q_span_rep(span: tuple[int, int]) -> np.ndarray:
        if span[1] >= sep:
            raise DataError(f"record {enc.id}: question span {span} crosses separator")
        return enc.span_rep(span)

    def a_span_rep(span: tuple[int, int]) -> np.ndarray:
        shifted = (span[0] + sep + 1, span[1] + sep + 1)
        if shifted[1] >= len(enc.tokens):
            raise DataError(f"record {enc.id}: answer span {span} outside encoding")
        return enc.span_rep(shifted)

    local = {cid: i for i, cid in enumerate(extraction.subgraph.nodes)}
    node_feats = (
        concept_table[extraction.subgraph.nodes]
        if extraction.subgraph.nodes
        else np.zeros((0, dims.d_g))
    )
    edges = [(local[h], r, local[t]) for h, r, t in extraction.subgraph.edges]
    groups = []
    for grp in extraction.qa_groups():
        src, dst = grp.pair
        groups.append(GroupInput(
            src_idx=local[src],
            dst_idx=local[dst],
            src_ctx=q_span_rep(_first_span(extraction.q_concepts, src)),
            dst_ctx=a_span_rep(_first_span(extraction.a_concepts, dst)),
            paths=[
                PathInput(
                    tuple(local[c] for c in sp.path.nodes),
                    tuple(sp.path.rels),
                )
                for sp in grp.paths
            ],
        ))
    answer_idxs = sorted({
        local[gc.concept] for gc in extraction.a_concepts if gc.concept in local
    })
    return CandidateInput(
        node_feats=node_feats,
        edges=edges,
        groups=groups,
        answer_idxs=answer_idxs,
        h0=enc.summary,
    )


def empty_candidate_input(enc: ContextualEncoding, dims: ModelDims) -> CandidateInput:
    """Knowledge-free input: the scorer sees only the contextual summary."""
    if enc.d_h != dims.d_h:
        raise DataError(f"record {enc.id}: encoder width {enc.d_h} != d_h {dims.d_h}")
    return CandidateInput(
        node_feats=np.zeros((0, dims.d_g)),
        edges=[],
        groups=[],
        answer_idxs=[],
        h0=enc.summary,
    )


PreparedInstance = tuple[list[CandidateInput], int]


def prepare_instances(
    instances: Sequence[QAInstance],
    extractions: dict[str, GroundedCandidate],
    encodings: dict[str, ContextualEncoding],
    concept_table: np.ndarray,
    dims: ModelDims,
    require_gold: bool = True,
) -> list[PreparedInstance]:
    """Assemble scorer inputs for each instance.

    Every question-candidate pair needs an encoding record; a pair without an
    extraction record is treated as knowledge-free rather than an error.
    """
    out: list[PreparedInstance] = []
    for inst in instances:
        if require_gold and inst.gold is None:
            raise DataError(f"instance {inst.id!r} has no gold label")
        cands = []
        for k in range(NUM_CANDIDATES):
            pid = inst.pair_id(k)
            enc = encodings.get(pid)
            if enc is None:
                raise DataError(f"no encoding record for pair {pid!r}")
            ext = extractions.get(pid)
            if ext is None:
                cands.append(empty_candidate_input(enc, dims))
            else:
                cands.append(build_candidate_input(ext, enc, concept_table, dims))
        out.append((cands, -1 if inst.gold is None else inst.gold))
    return out


def run_extraction(
    instances: Sequence[QAInstance],
    g: KnowledgeGraph,
    kge: TransEModel,
    words: WordVectors,
    cfg: SonarConfig,
) -> dict[str, GroundedCandidate]:
    out: dict[str, GroundedCandidate] = {}
    for inst in instances:
        for k, cand_text in enumerate(inst.candidates):
            pid = inst.pair_id(k)
            out[pid] = extract_candidate(pid, inst.question, cand_text, g, kge, words, cfg)
    return out


def run_stub_encoding(
    instances: Sequence[QAInstance], d_h: int, seed: int = 0
) -> dict[str, ContextualEncoding]:
    out: dict[str, ContextualEncoding] = {}
    for inst in instances:
        for k, cand_text in enumerate(inst.candidates):
            pid = inst.pair_id(k)
            out[pid] = stub_encode(pid, inst.question, cand_text, d_h, seed)
    return out


# -- optimization -------------------------------------------------------------

class Adam:
    """Standard Adam with bias correction; lr zero leaves weights untouched."""

    def __init__(
        self,
        named: list[tuple[str, "object"]],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.named = named
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(t.data) for name, t in named}
        self.v = {name: np.zeros_like(t.data) for name, t in named}

    def zero_grad(self) -> None:
        for _, t in self.named:
            t.zero_grad()

    def step(self) -> None:
        self.t += 1
        for name, t in self.named:
            g = t.grad
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / (1.0 - self.beta1 ** self.t)
            v_hat = self.v[name] / (1.0 - self.beta2 ** self.t)
            t.data = t.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    steps: int = 1200
    batch_size: int = 24
    seed: int = 0
    target_accuracy: float | None = None  # optional early stop on the train set
    check_every: int = 25

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.steps < 0 or self.batch_size < 1 or self.check_every < 1:
            raise ValueError("steps, batch_size, check_every must be positive")


def train(
    model: SketchModel,
    data: Sequence[PreparedInstance],
    cfg: TrainConfig,
    ablation: Ablation = Ablation(),
    log: IO[str] | None = None,
) -> list[float]:
    """Minimize mean cross entropy with Adam; returns per-step losses.

    Batches cycle through seeded epoch permutations, so equal seeds replay
    the exact same run. When target_accuracy is set, training stops at the
    first checkpoint where train-set accuracy reaches it.
    """
    if not data:
        raise ValueError("no training data")
    if any(gold < 0 for _, gold in data):
        raise ValueError("training data must be labeled")
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.trainable_parameters(), cfg.learning_rate)
    queue: list[int] = []
    history: list[float] = []
    for step in range(1, cfg.steps + 1):
        while len(queue) < cfg.batch_size:
            queue.extend(rng.permutation(len(data)).tolist())
        batch = [data[i] for i in queue[:cfg.batch_size]]
        del queue[:cfg.batch_size]
        loss = batch_loss(model, batch, ablation)
        opt.zero_grad()
        loss.backward()
        opt.step()
        history.append(loss.item())
        if log is not None:
            log.write(f"{step}\t{loss.item():.6f}\n")
        if cfg.target_accuracy is not None and step % cfg.check_every == 0:
            acc, _ = evaluate(model, data, ablation)
            if acc >= cfg.target_accuracy:
                break
    return history


def evaluate(
    model: SketchModel,
    data: Sequence[PreparedInstance],
    ablation: Ablation = Ablation(),
) -> tuple[float, list[tuple[int, np.ndarray]]]:
    """Accuracy plus per-instance (predicted index, probabilities).

    Ties go to the lowest candidate index. Accuracy counts only labeled
    instances; with none labeled it is 0.
    """
    results = []
    hits = 0
    labeled = 0
    for cands, gold in data:
        probs = instance_probs(model, cands, ablation)
        pred = int(np.argmax(probs))
        results.append((pred, probs))
        if gold >= 0:
            labeled += 1
            hits += int(pred == gold)
    return (hits / labeled if labeled else 0.0), results


def write_predictions(
    instances: Sequence[QAInstance],
    results: Sequence[tuple[int, np.ndarray]],
    out: IO[str],
) -> None:
    """One line per instance: id, predicted label, five probabilities."""
    if len(instances) != len(results):
        raise ValueError("results do not align with instances")
    for inst, (pred, probs) in zip(instances, results):
        cols = [inst.id, inst.labels[pred]] + [f"{p:.6f}" for p in probs]
        out.write("\t".join(cols) + "\n")


# -- synthetic regression fixture ---------------------------------------------

@dataclass
class OverfitFixture:
    instances: list[QAInstance]
    graph: KnowledgeGraph
    kge: TransEModel
    words: WordVectors
    dims: ModelDims
    extractions: dict[str, GroundedCandidate]
    encodings: dict[str, ContextualEncoding]
    prepared: list[PreparedInstance]
    prepared_no_knowledge: list[PreparedInstance]


def _fixture_gold(i: int) -> int:
    # Rotated assignment: balanced over answers, not expressible as
    # independent question and answer biases, so a text-only scorer
    # cannot shortcut it quickly.
    return (i + i // 5) % 5


def build_overfit_fixture(
    num_questions: int = 20,
    d_h: int = 24,
    d_kg: int = 16,
    seed: int = 0,
) -> OverfitFixture:
    """Dataset whose gold answer is exactly the candidate reachable in the graph.

    Each question mentions one topic concept with a single outgoing edge to
    its gold answer concept; the five answer texts are shared across all
    questions. Word vectors cluster around one direction so the concept
    relevance test passes, and the trained link validity clears its
    threshold, so every gold path survives filtering while wrong candidates
    stay knowledge-free.
    """
    rng = np.random.default_rng(seed)
    topics = [f"topic{i:02d}" for i in range(num_questions)]
    answers = [f"answer{j}" for j in range(NUM_CANDIDATES)]

    triple_lines = [
        f"linked_to\t{topics[i]}\t{answers[_fixture_gold(i)]}\n"
        for i in range(num_questions)
    ]
    graph = load_triples(triple_lines, "tsv3")

    base = rng.standard_normal(d_kg)
    base /= np.linalg.norm(base)
    vec_lines = []
    for word in topics + answers:
        v = base + 0.05 * rng.standard_normal(d_kg)
        vec_lines.append(word + " " + " ".join(f"{x:.8f}" for x in v) + "\n")
    words = load_word_vectors(vec_lines)

    kge = train_transe(
        graph,
        TransEConfig(dim=d_kg, margin=1.0, learning_rate=0.05, epochs=200, seed=seed),
    )

    instances = [
        QAInstance(
            id=f"q{i:02d}",
            question=f"what pairs naturally with {topics[i]}",
            candidates=list(answers),
            gold=_fixture_gold(i),
        )
        for i in range(num_questions)
    ]

    dims = ModelDims(
        d_h=d_h, d_g=d_kg, d_r=d_kg, d_att=d_kg, d_gru=12, d_k=16, gat_layers=2
    )
    extractions = run_extraction(instances, graph, kge, words, SonarConfig())
    encodings = run_stub_encoding(instances, d_h, seed)
    prepared = prepare_instances(
        instances, extractions, encodings, kge.concepts.data, dims
    )
    prepared_no_knowledge = prepare_instances(
        instances, {}, encodings, kge.concepts.data, dims
    )
    return OverfitFixture(
        instances=instances,
        graph=graph,
        kge=kge,
        words=words,
        dims=dims,
        extractions=extractions,
        encodings=encodings,
        prepared=prepared,
        prepared_no_knowledge=prepared_no_knowledge,
    )
