"""Translation embeddings: distances, validity, training, and text export."""

import io

import numpy as np
import pytest

from seekqa.errors import DataError
from seekqa.kge import (
    EmbeddingTable,
    TransEConfig,
    TransEModel,
    export_table,
    import_table,
    train_transe,
    transe_distance,
    triple_validity,
)
from seekqa.kgstore import load_triples


def chain_graph():
    """a -> b -> c -> ... -> j plus a few cross links, one relation."""
    names = "abcdefghij"
    lines = [f"next\t{names[i]}\t{names[i + 1]}\n" for i in range(9)]
    lines += ["next\ta\tc\n"]
    return load_triples(lines, "tsv3")


def toy_model(dim=3, margin=1.0):
    concepts = EmbeddingTable(["x", "y"], np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    rel = np.array([[-1.0, 1.0, 0.0]])
    relations = EmbeddingTable(["r", "r^-1"], np.concatenate([rel, -rel]))
    return TransEModel(concepts, relations, margin)


class TestDistance:
    def test_exact_translation_gives_zero(self):
        assert transe_distance([1.0, 0.0], [0.5, 0.5], [1.5, 0.5]) == 0.0

    def test_known_value(self):
        # h + r - t = (1, 1) -> sqrt(2)
        d = transe_distance([1.0, 0.0], [0.0, 1.0], [0.0, 0.0])
        np.testing.assert_allclose(d, np.sqrt(2.0), rtol=0, atol=1e-15)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            transe_distance([1.0, 0.0], [0.0], [0.0, 0.0])


class TestValidity:
    def test_perfect_triple_scores_sigmoid_of_margin(self):
        model = toy_model(margin=1.0)
        # x + r = y exactly, so distance 0 and validity sigmoid(1)
        v = triple_validity(model, 0, 0, 1)
        np.testing.assert_allclose(v, 1.0 / (1.0 + np.exp(-1.0)), atol=1e-15)
        np.testing.assert_allclose(v, 0.7310585786300049, atol=1e-12)

    def test_inverse_id_scores_like_base_triple(self):
        model = toy_model()
        assert triple_validity(model, 1, 1, 0) == triple_validity(model, 0, 0, 1)

    def test_monotone_decreasing_in_distance(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            h = rng.standard_normal(4)
            r = rng.standard_normal(4)
            t_near = h + r + 0.1 * rng.standard_normal(4)
            t_far = h + r + 2.0 * rng.standard_normal(4) + 3.0
            concepts = EmbeddingTable(["h", "near", "far"], np.stack([h, t_near, t_far]))
            relations = EmbeddingTable(["r", "r^-1"], np.stack([r, -r]))
            model = TransEModel(concepts, relations, 1.0)
            d_near = transe_distance(h, r, t_near)
            d_far = transe_distance(h, r, t_far)
            if d_near < d_far:
                assert triple_validity(model, 0, 0, 1) > triple_validity(model, 0, 0, 2)

    def test_always_strictly_inside_unit_interval(self):
        rng = np.random.default_rng(7)
        concepts = EmbeddingTable(["a", "b"], rng.standard_normal((2, 5)) * 50)
        relations = EmbeddingTable(["r", "r^-1"], rng.standard_normal((2, 5)) * 50)
        model = TransEModel(concepts, relations, 1.0)
        v = triple_validity(model, 0, 0, 1)
        assert 0.0 < v < 1.0


class TestTraining:
    def test_zero_epochs_returns_seeded_uniform_init(self):
        g = chain_graph()
        cfg = TransEConfig(dim=8, epochs=0, seed=5)
        model = train_transe(g, cfg)
        rng = np.random.default_rng(5)
        bound = 6.0 / np.sqrt(8)
        expect_ent = rng.uniform(-bound, bound, size=(g.num_concepts, 8))
        expect_rel = rng.uniform(-bound, bound, size=(g.num_relations, 8))
        np.testing.assert_array_equal(model.concepts.data, expect_ent)
        np.testing.assert_array_equal(model.relations.data[: g.num_relations], expect_rel)

    def test_deterministic_per_seed(self):
        g = chain_graph()
        cfg = TransEConfig(dim=6, epochs=5, seed=3)
        m1 = train_transe(g, cfg)
        m2 = train_transe(g, cfg)
        np.testing.assert_array_equal(m1.concepts.data, m2.concepts.data)
        np.testing.assert_array_equal(m1.relations.data, m2.relations.data)

    def test_different_seeds_differ(self):
        g = chain_graph()
        m1 = train_transe(g, TransEConfig(dim=6, epochs=2, seed=0))
        m2 = train_transe(g, TransEConfig(dim=6, epochs=2, seed=1))
        assert not np.array_equal(m1.concepts.data, m2.concepts.data)

    def test_concept_rows_unit_norm_after_training(self):
        g = chain_graph()
        model = train_transe(g, TransEConfig(dim=6, epochs=3, seed=0))
        norms = np.linalg.norm(model.concepts.data, axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    def test_inverse_rows_are_negated_base_rows(self):
        g = chain_graph()
        model = train_transe(g, TransEConfig(dim=6, epochs=3, seed=0))
        r = g.num_relations
        np.testing.assert_array_equal(model.relations.data[r:], -model.relations.data[:r])
        assert model.relations.names[r:] == [n + "^-1" for n in model.relations.names[:r]]

    def test_empty_graph_rejected(self):
        g = chain_graph()
        g.triples = []
        with pytest.raises(ValueError, match="empty graph"):
            train_transe(g, TransEConfig(dim=4, epochs=1))

    def test_training_improves_mean_rank(self):
        """Oracle: rank true tails among all concepts; training must beat init."""
        g = chain_graph()

        def mean_rank(model):
            ranks = []
            for t in g.triples:
                d_true = transe_distance(
                    model.concepts.vec(t.head),
                    model.relations.vec(t.rel),
                    model.concepts.vec(t.tail),
                )
                d_all = [
                    transe_distance(
                        model.concepts.vec(t.head),
                        model.relations.vec(t.rel),
                        model.concepts.vec(c),
                    )
                    for c in range(g.num_concepts)
                ]
                ranks.append(1 + sum(1 for d in d_all if d < d_true))
            return float(np.mean(ranks))

        before = mean_rank(train_transe(g, TransEConfig(dim=8, epochs=0, seed=0)))
        after = mean_rank(
            train_transe(
                g, TransEConfig(dim=8, epochs=200, learning_rate=0.05, seed=0)
            )
        )
        assert after < before


class TestTextExport:
    def test_round_trip_preserves_values(self):
        rng = np.random.default_rng(42)
        table = EmbeddingTable(["a", "b", "c"], rng.standard_normal((3, 4)))
        buf = io.StringIO()
        export_table(table, buf)
        back = import_table(io.StringIO(buf.getvalue()))
        assert back.names == table.names
        np.testing.assert_allclose(back.data, table.data, rtol=0, atol=1e-16)

    def test_header_line_format(self):
        table = EmbeddingTable(["w"], np.array([[0.5, -1.5]]))
        buf = io.StringIO()
        export_table(table, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "1 2"
        assert lines[1].startswith("w ")

    def test_truncated_file_rejected(self):
        with pytest.raises(DataError, match="truncated"):
            import_table(["3 2\n", "a 1 2\n"])

    def test_ragged_row_rejected(self):
        with pytest.raises(DataError, match="row 1"):
            import_table(["2 2\n", "a 1 2\n", "b 1\n"])

    def test_non_numeric_rejected(self):
        with pytest.raises(DataError, match="non-numeric"):
            import_table(["1 2\n", "a 1 oops\n"])

    def test_extra_rows_rejected(self):
        with pytest.raises(DataError, match="more rows"):
            import_table(["1 2\n", "a 1 2\n", "b 3 4\n"])

    def test_duplicate_names_rejected(self):
        with pytest.raises(DataError, match="duplicate"):
            import_table(["2 1\n", "a 1\n", "a 2\n"])

    def test_empty_file_rejected(self):
        with pytest.raises(DataError, match="empty"):
            import_table([])


class TestConfigValidation:
    def test_bad_dim_rejected(self):
        with pytest.raises(ValueError):
            TransEConfig(dim=0)

    def test_bad_margin_rejected(self):
        with pytest.raises(ValueError):
            TransEConfig(margin=0.0)
