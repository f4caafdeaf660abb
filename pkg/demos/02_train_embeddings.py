#!/usr/bin/env python3
"""Train translation-based link embeddings and watch true links pull ahead.

Fits concept and relation vectors on a small graph, then compares the
validity scores and ranks of real triples against corrupted ones before
and after training.
"""

import io

import numpy as np

from seekqa.kge import TransEConfig, export_table, train_transe, triple_validity
from seekqa.kgstore import load_triples

TRIPLES = """\
used_for\tpan\tfrying
used_for\toven\tbaking
used_for\tknife\tcutting
used_for\tkettle\tboiling
at_location\tpan\tkitchen
at_location\toven\tkitchen
at_location\tknife\tdrawer
at_location\tkettle\tcounter
related_to\tfrying\tcooking
related_to\tbaking\tcooking
related_to\tboiling\tcooking
related_to\tcutting\tpreparation
"""


def mean_true_rank(model, g) -> float:
    """Average rank of each triple's true tail among all concepts."""
    ranks = []
    for t in g.triples:
        score = triple_validity(model, t.head, t.rel, t.tail)
        better = sum(
            1 for c in range(g.num_concepts)
            if c != t.tail and triple_validity(model, t.head, t.rel, c) > score
        )
        ranks.append(better + 1)
    return float(np.mean(ranks))


def main() -> None:
    g = load_triples(io.StringIO(TRIPLES))
    print(f"graph: {g.num_concepts} concepts, {g.num_relations} relations, "
          f"{g.num_triples} triples")

    cold = train_transe(g, TransEConfig(dim=16, epochs=0, seed=7))
    warm = train_transe(g, TransEConfig(
        dim=16, margin=1.0, learning_rate=0.05, epochs=300, seed=7))

    print("\ntriple validity, before -> after training")
    probe = [g.triples[i] for i in (0, 4, 8)]
    for t in probe:
        b = triple_validity(cold, t.head, t.rel, t.tail)
        a = triple_validity(warm, t.head, t.rel, t.tail)
        name = (f"{g.relations.name(t.rel)}({g.concepts.name(t.head)}, "
                f"{g.concepts.name(t.tail)})")
        print(f"  {name:32s} {b:.3f} -> {a:.3f}")

    corrupt = probe[0]
    wrong_tail = g.concepts.get("drawer")
    assert wrong_tail is not None
    b = triple_validity(cold, corrupt.head, corrupt.rel, wrong_tail)
    a = triple_validity(warm, corrupt.head, corrupt.rel, wrong_tail)
    print(f"  {'used_for(pan, drawer)  [false]':32s} {b:.3f} -> {a:.3f}")

    print(f"\nmean rank of the true tail: "
          f"{mean_true_rank(cold, g):.2f} -> {mean_true_rank(warm, g):.2f} "
          f"(out of {g.num_concepts})")

    buf = io.StringIO()
    export_table(warm.concepts, buf)
    head = buf.getvalue().splitlines()
    print(f"\nexported concept table: header {head[0]!r}, "
          f"first row starts {' '.join(head[1].split()[:3])} ...")


if __name__ == "__main__":
    main()
