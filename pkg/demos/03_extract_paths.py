#!/usr/bin/env python3
"""Ground a question in the graph, enumerate link paths, and filter them.

Walks one question and two answer candidates through the whole extraction
pipeline: phrase grounding with plural fallback, bounded path search over
forward and reverse edges, three-aspect scoring, the keep-two-of-three
filter, and the per-candidate statistics.
"""

import io
import json

import numpy as np

from seekqa.kge import TransEConfig, train_transe
from seekqa.kgstore import load_triples
from seekqa.sonar import (ScoredPath, SonarConfig, candidate_to_json,
                          enumerate_paths, extract_candidate, filter_paths,
                          ground_concepts, path_stats, score_path)
from seekqa.wordvec import load_word_vectors, question_rep

TRIPLES = """\
capable_of\tegg\tfrying
related_to\tegg\tbreakfast
at_location\tegg\tfridge
used_for\tfrying_pan\tfrying
at_location\tfrying_pan\tkitchen
at_location\tfridge\tkitchen
related_to\tfrying\tcooking
used_for\toven\tbaking
related_to\tbaking\tcooking
at_location\toven\tkitchen
"""

# Theme weights (food, heat, storage, location) per word; the actual vectors
# mix four fixed random directions at the link-embedding width.
THEMES = {
    "egg": (1.0, 0.3, 0.0, 0.0),
    "eggs": (1.0, 0.3, 0.0, 0.0),
    "breakfast": (1.0, 0.0, 0.0, 0.0),
    "cook": (0.6, 0.8, 0.0, 0.0),
    "frying": (0.4, 1.0, 0.0, 0.0),
    "pan": (0.0, 0.8, 0.0, 0.2),
    "cooking": (0.8, 0.6, 0.0, 0.0),
    "fridge": (-0.2, 0.0, 1.0, 0.3),
    "kitchen": (-0.2, 0.0, 0.2, 1.0),
    "oven": (0.0, 0.9, 0.0, 0.3),
    "baking": (0.3, 0.9, 0.0, 0.0),
}

QUESTION = "how should i cook eggs for breakfast"
CANDIDATES = ["frying pan", "kitchen"]


def build_word_vectors(dim: int):
    rng = np.random.default_rng(0)
    axes = rng.standard_normal((4, dim))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    lines = []
    for word, weights in THEMES.items():
        v = np.asarray(weights) @ axes + 0.01 * rng.standard_normal(dim)
        lines.append(word + " " + " ".join(f"{x:.8f}" for x in v) + "\n")
    return load_word_vectors(lines)


def describe_path(p, g) -> str:
    bits = [g.concepts.name(p.nodes[0])]
    for i, rel in enumerate(p.rels):
        bits.append(f"--{g.relation_label(rel)}--> {g.concepts.name(p.nodes[i + 1])}")
    return " ".join(bits)


def main() -> None:
    g = load_triples(io.StringIO(TRIPLES))
    wv = build_word_vectors(16)
    kge = train_transe(g, TransEConfig(
        dim=16, margin=1.0, learning_rate=0.1, epochs=500, seed=1))
    cfg = SonarConfig()

    print(f"question: {QUESTION!r}")
    grounded = ground_concepts(QUESTION, g)
    for gc in grounded:
        print(f"  tokens[{gc.span[0]}:{gc.span[1]}] -> concept "
              f"{g.concepts.name(gc.concept)!r}")
    print("  ('eggs' matched through its singular form)")

    for text in CANDIDATES:
        print(f"\ncandidate: {text!r}")
        a_grounded = ground_concepts(text, g)
        for gc in a_grounded:
            print(f"  grounds to {g.concepts.name(gc.concept)!r} "
                  f"(spans {gc.span[1] - gc.span[0] + 1} token(s))")
        q_rep = question_rep(QUESTION, wv)
        src = grounded[0].concept
        dst = a_grounded[0].concept
        paths = enumerate_paths(g, src, dst, cfg.max_hop)
        scored = []
        for p in paths:
            s = score_path(p, q_rep, kge, wv, g)
            scored.append(ScoredPath(p, s))
            print(f"  {describe_path(p, g)}")
            marks = (
                f"link {s.link:.3f} {'ok' if s.link >= cfg.link_threshold else 'LOW'}",
                f"concept {s.concept:.3f} "
                f"{'ok' if s.concept >= cfg.concept_threshold else 'LOW'}",
                f"relation {s.relation:.3f} "
                f"{'ok' if s.relation >= cfg.relation_threshold else 'LOW'}",
            )
            print("    " + ", ".join(marks))
        kept = filter_paths(scored, cfg)
        print(f"  filter keeps {len(kept)} of {len(paths)} "
              "(a path needs two of the three checks)")

    print("\nfull extraction per candidate")
    cands = []
    for k, text in enumerate(CANDIDATES):
        cand = extract_candidate(f"q0|{k}", QUESTION, text, g, kge, wv, cfg)
        cands.append(cand)
        qa = cand.qa_groups()
        n_paths = sum(len(grp.paths) for grp in qa)
        print(f"  {text!r}: {len(qa)} question->answer concept pair(s), "
              f"{n_paths} surviving path(s), "
              f"subgraph {len(cand.subgraph.nodes)} nodes / "
              f"{len(cand.subgraph.edges)} edges")

    st = path_stats(cands)
    print(f"\nstats over {st.num_pairs} pairs: {st.total_links} links, "
          f"{st.avg_links_per_qa:.2f} links per pair")

    line = json.dumps(candidate_to_json(cands[0], g), sort_keys=True)
    print(f"\ninterchange record for {cands[0].id!r} starts: {line[:72]}...")


if __name__ == "__main__":
    main()
