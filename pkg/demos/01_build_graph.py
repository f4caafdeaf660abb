#!/usr/bin/env python3
"""Load commonsense triples into an indexed graph and walk its edges.

Shows the two supported input formats, the shared concept and relation
vocabularies, traversal over forward and reverse edges, and the binary
snapshot round trip.
"""

import io
import tempfile

from seekqa.kgstore import load_snapshot, load_triples, save_snapshot

TSV_TRIPLES = """\
used_for\tpan\tfrying
at_location\tpan\tkitchen
used_for\toven\tbaking
at_location\toven\tkitchen
part_of\tburner\tstove
at_location\tstove\tkitchen
used_for\tknife\tcutting
related_to\tfrying\tcooking
related_to\tbaking\tcooking
capable_of\tcook\tfrying
"""

# Raw assertion-dump rows: uri columns, extra metadata, one non-English row
# that the loader drops silently.
CSV_TRIPLES = """\
/a/x\t/r/UsedFor\t/c/en/pan/n\t/c/en/frying\t{"weight": 2.0}
/a/x\t/r/AtLocation\t/c/en/pan\t/c/en/kitchen\t{"weight": 1.0}
/a/x\t/r/UsedFor\t/c/fr/poele\t/c/fr/friture\t{"weight": 1.0}
/a/x\t/r/RelatedTo\t/c/en/frying/n/wn\t/c/en/cooking\t{"weight": 0.5}
"""


def section(title: str) -> None:
    print()
    print(title)
    print("-" * len(title))


def main() -> None:
    section("Tab-separated triples")
    g = load_triples(io.StringIO(TSV_TRIPLES))
    print(f"concepts:  {g.num_concepts}")
    print(f"relations: {g.num_relations} base, ids "
          f"[{g.num_relations}, {2 * g.num_relations}) traverse them backwards")
    print(f"triples:   {g.num_triples}")
    print("relation vocabulary:", ", ".join(
        g.relations.name(r) for r in range(g.num_relations)))

    section("Neighbors of 'kitchen'")
    kitchen = g.concepts.get("kitchen")
    assert kitchen is not None
    for rel, other in g.neighbors(kitchen):
        arrow = "<-" if g.is_inverse(rel) else "->"
        print(f"  kitchen {arrow} {g.concepts.name(other):8s}"
              f"  via {g.relation_label(rel)}")
    fwd_only = g.neighbors(kitchen, directed_only=True)
    print(f"forward-only neighbor count: {len(fwd_only)} "
          f"(kitchen never appears as a head here)")

    section("Assertion-dump rows")
    g2 = load_triples(io.StringIO(CSV_TRIPLES), format="conceptnet_csv")
    print(f"4 rows in, {g2.num_triples} triples kept "
          "(the non-English row is skipped, sense suffixes are stripped)")
    for t in g2.triples:
        print(f"  {g2.relations.name(t.rel)}("
              f"{g2.concepts.name(t.head)}, {g2.concepts.name(t.tail)})")

    section("Snapshot round trip")
    with tempfile.TemporaryFile() as fh:
        save_snapshot(g, fh)
        size = fh.tell()
        fh.seek(0)
        back = load_snapshot(fh)
    same = (back.num_concepts == g.num_concepts
            and back.num_relations == g.num_relations
            and back.num_triples == g.num_triples)
    print(f"{size} bytes on disk, counts preserved: {same}")


if __name__ == "__main__":
    main()
