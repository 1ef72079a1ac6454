import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chronorec.corpus import Corpus, Paper, TimeSliceConfig, assign_slices
from chronorec.embeddings import fit_max_abs_scaler, train_content_embeddings
from chronorec.embeddings.docvec import DocVectorParams
from chronorec.embeddings.table import EmbeddingTable
from chronorec.errors import DataError
from chronorec.profiles import build_profile, nearest_neighbors, pool_node_embedding

from oracles import knn_oracle


def sliced_corpus_with_vectors(rng, per_slice=(50, 30), dim=6):
    papers = {}
    table = EmbeddingTable(dim=dim, space="content")
    year_of_slice = (2000, 2003)
    serial = 0
    for s, count in enumerate(per_slice):
        for _ in range(count):
            pid = f"p{serial:03d}"
            serial += 1
            papers[pid] = Paper(pid, year_of_slice[s], ("tok",), ())
            table.put(pid, rng.normal(size=dim))
    corpus = assign_slices(
        Corpus(papers=papers), TimeSliceConfig(((2000, 2002), (2003, 2005)))
    )
    return corpus, table


class TestNearestNeighbors:
    def test_exact_match_comes_first(self, rng):
        corpus, table = sliced_corpus_with_vectors(rng)
        target = "p007"
        got = nearest_neighbors(table[target], corpus, table, 0, k=1)
        assert got == [target]

    def test_k_larger_than_slice_returns_whole_slice(self, rng):
        corpus, table = sliced_corpus_with_vectors(rng, per_slice=(5, 3))
        got = nearest_neighbors(rng.normal(size=6), corpus, table, 1, k=50)
        assert len(got) == 3

    def test_matches_exhaustive_sort_oracle(self, rng):
        corpus, table = sliced_corpus_with_vectors(rng, per_slice=(50, 10))
        query = rng.normal(size=6)
        slice_vecs = {pid: table[pid] for pid in corpus.papers_in_slice(0)}
        assert nearest_neighbors(query, corpus, table, 0, k=10) == knn_oracle(
            query, slice_vecs, 10
        )

    def test_prefix_property_against_oracle(self, rng):
        corpus, table = sliced_corpus_with_vectors(rng, per_slice=(30, 5))
        query = rng.normal(size=6)
        slice_vecs = {pid: table[pid] for pid in corpus.papers_in_slice(0)}
        full = knn_oracle(query, slice_vecs, len(slice_vecs))
        for k in (1, 3, 7, 30):
            assert nearest_neighbors(query, corpus, table, 0, k=k) == full[:k]

    def test_tie_break_ascending_id(self):
        papers = {p: Paper(p, 2000, ("t",), ()) for p in ("zz", "aa", "mm")}
        corpus = assign_slices(
            Corpus(papers=papers), TimeSliceConfig(((2000, 2001), (2002, 2003)))
        )
        table = EmbeddingTable(dim=2, space="content")
        for pid in papers:
            table.put(pid, np.array([1.0, 0.0]))
        got = nearest_neighbors(np.array([2.0, 0.0]), corpus, table, 0, k=3)
        assert got == ["aa", "mm", "zz"]

    def test_exclude_query_itself(self, rng):
        corpus, table = sliced_corpus_with_vectors(rng)
        got = nearest_neighbors(table["p001"], corpus, table, 0, k=5, exclude="p001")
        assert "p001" not in got

    def test_empty_slice_errors(self, rng):
        corpus, table = sliced_corpus_with_vectors(rng, per_slice=(4, 2))
        lonely = {
            pid: p for pid, p in corpus.papers.items() if corpus.slice_of[pid] == 0
        }
        small = assign_slices(
            Corpus(papers=lonely), TimeSliceConfig(((2000, 2002), (2003, 2005)))
        )
        with pytest.raises(DataError, match="slice 1"):
            nearest_neighbors(rng.normal(size=6), small, table, 1, k=2)

    def test_bad_k(self, rng):
        corpus, table = sliced_corpus_with_vectors(rng)
        with pytest.raises(DataError):
            nearest_neighbors(rng.normal(size=6), corpus, table, 0, k=0)


class TestPooling:
    def test_single_neighbor_is_identity(self, rng):
        table = EmbeddingTable(dim=4, space="node")
        table.put("a", rng.normal(size=4))
        assert np.array_equal(pool_node_embedding(["a"], table), table["a"])

    def test_opposite_vectors_cancel(self):
        table = EmbeddingTable(dim=3, space="node")
        table.put("a", np.array([1.0, -2.0, 3.0]))
        table.put("b", np.array([-1.0, 2.0, -3.0]))
        assert pool_node_embedding(["a", "b"], table).tolist() == [0.0, 0.0, 0.0]

    def test_matches_mean_oracle(self, rng):
        table = EmbeddingTable(dim=5, space="node")
        ids = [f"n{i}" for i in range(5)]
        for pid in ids:
            table.put(pid, rng.normal(size=5))
        got = pool_node_embedding(ids, table)
        expected = [
            sum(table[pid][j] for pid in ids) / len(ids) for j in range(5)
        ]
        assert np.allclose(got, expected, atol=1e-12)

    def test_missing_vectors_skipped(self, rng):
        table = EmbeddingTable(dim=2, space="node")
        table.put("a", np.array([2.0, 4.0]))
        got = pool_node_embedding(["a", "ghost"], table)
        assert got.tolist() == [2.0, 4.0]

    def test_no_vectors_pools_to_zero(self):
        table = EmbeddingTable(dim=3, space="node")
        assert pool_node_embedding(["ghost"], table).tolist() == [0.0, 0.0, 0.0]


@settings(max_examples=30, deadline=None)
@given(perm=st.permutations(list(range(6))))
def test_pooling_permutation_invariant(perm):
    rng = np.random.default_rng(5)
    table = EmbeddingTable(dim=4, space="node")
    ids = [f"n{i}" for i in range(6)]
    for pid in ids:
        table.put(pid, rng.normal(size=4))
    base = pool_node_embedding(ids, table)
    shuffled = pool_node_embedding([ids[i] for i in perm], table)
    assert np.allclose(base, shuffled, atol=1e-12)


def topic_corpus(n_per_topic=8):
    texts = {
        "topicA": "walks graphs embeddings nodes edges neighbors communities",
        "topicB": "membrane protein enzyme folding pathway receptor kinase",
    }
    papers = {}
    for t, (topic, text) in enumerate(texts.items()):
        for i in range(n_per_topic):
            pid = f"{topic}{i}"
            papers[pid] = Paper(pid, 2000 + t, tuple(text.split()), ())
    return assign_slices(
        Corpus(papers=papers), TimeSliceConfig(((2000, 2000), (2001, 2001)))
    )


class TestBuildProfile:
    def test_neighbors_come_from_query_slice_only(self):
        corpus = topic_corpus()
        model = train_content_embeddings(corpus, 12, DocVectorParams(epochs=60, seed=1))
        table = model.table
        node_table = EmbeddingTable(dim=12, space="node")
        rng = np.random.default_rng(0)
        for pid in corpus.papers:
            node_table.put(pid, rng.normal(size=12))
        prof = build_profile(
            corpus.papers["topicA0"].abstract, 2000, corpus, model, table,
            node_table, k=4, query_id="topicA0",
        )
        assert prof.query_slice == 0
        assert "topicA0" not in prof.neighbor_ids
        assert all(corpus.slice_of[pid] == 0 for pid in prof.neighbor_ids)
        # same-topic papers dominate the neighbor list
        assert sum(pid.startswith("topicA") for pid in prof.neighbor_ids) >= 3

    def test_matches_exhaustive_oracle_for_known_query(self):
        corpus = topic_corpus()
        model = train_content_embeddings(corpus, 12, DocVectorParams(epochs=60, seed=1))
        table = model.table
        node_table = EmbeddingTable(dim=12, space="node")
        for pid in corpus.papers:
            node_table.put(pid, np.ones(12))
        prof = build_profile(
            corpus.papers["topicB3"].abstract, 2001, corpus, model, table,
            node_table, k=5, query_id="topicB3",
        )
        slice_vecs = {
            pid: table[pid]
            for pid in corpus.papers_in_slice(1)
            if pid != "topicB3"
        }
        assert prof.neighbor_ids == knn_oracle(table["topicB3"], slice_vecs, 5)

    def test_large_k_operating_points_accepted(self):
        corpus = topic_corpus(n_per_topic=12)
        model = train_content_embeddings(corpus, 8, DocVectorParams(epochs=5, seed=1))
        node_table = EmbeddingTable(dim=8, space="node")
        for pid in corpus.papers:
            node_table.put(pid, np.ones(8))
        for k in (100, 180):
            prof = build_profile(
                corpus.papers["topicA0"].abstract, 2000, corpus, model, model.table,
                node_table, k=k, query_id="topicA0",
            )
            assert len(prof.neighbor_ids) == 11  # slice smaller than k

    def test_scalers_apply_to_features_not_search(self):
        corpus = topic_corpus()
        model = train_content_embeddings(corpus, 8, DocVectorParams(epochs=30, seed=2))
        node_table = EmbeddingTable(dim=8, space="node")
        rng = np.random.default_rng(1)
        for pid in corpus.papers:
            node_table.put(pid, rng.normal(size=8))
        raw = build_profile(
            corpus.papers["topicA1"].abstract, 2000, corpus, model, model.table,
            node_table, k=3, query_id="topicA1",
        )
        scaler_c = fit_max_abs_scaler([raw.x_content * 2])
        scaler_n = fit_max_abs_scaler([raw.x_node * 2])
        scaled = build_profile(
            corpus.papers["topicA1"].abstract, 2000, corpus, model, model.table,
            node_table, k=3, query_id="topicA1",
            content_scaler=scaler_c, node_scaler=scaler_n,
        )
        assert scaled.neighbor_ids == raw.neighbor_ids
        assert np.allclose(scaled.x_content, scaler_c.apply(raw.x_content))
        assert np.allclose(scaled.x_node, scaler_n.apply(raw.x_node))
