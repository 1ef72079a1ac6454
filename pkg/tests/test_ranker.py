import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chronorec.corpus import Corpus, Paper, TimeSliceConfig, assign_slices
from chronorec.embeddings.table import EmbeddingTable
from chronorec.errors import DataError
from chronorec.ranker import (
    RankContext,
    RankedList,
    WeightScheme,
    apply_weight_scheme,
    candidate_pool,
    cbf_scores,
    citerank_weights,
    recommend,
    rerank_time_preference,
    weight_freshness,
    weight_pub_preference,
    whin_csl_score,
)

from oracles import (
    cosine_oracle,
    eq8_oracle,
    freshness_oracle,
    pagerank_oracle,
    pub_preference_oracle,
    whin_oracle,
)


def table_of(vecs: dict[str, np.ndarray], space="content") -> EmbeddingTable:
    dim = len(next(iter(vecs.values())))
    table = EmbeddingTable(dim=dim, space=space)
    for pid, v in vecs.items():
        table.put(pid, np.asarray(v, dtype=np.float64))
    return table


class TestCbf:
    def test_identical_candidate_ranks_first_with_one(self, rng):
        q = rng.normal(size=4)
        vecs = {"same": q.copy(), "other": rng.normal(size=4)}
        ranked = cbf_scores(q, ["same", "other"], table_of(vecs))
        assert ranked.entries[0][0] == "same"
        assert ranked.entries[0][1] == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_candidates_tie_break_by_id(self):
        q = np.array([1.0, 0.0])
        vecs = {"zz": np.array([0.0, 1.0]), "aa": np.array([0.0, -1.0])}
        ranked = cbf_scores(q, ["zz", "aa"], table_of(vecs))
        assert [e[0] for e in ranked.entries] == ["aa", "zz"]
        assert all(e[1] == 0.0 for e in ranked.entries)

    def test_matches_exhaustive_sort_oracle(self, rng):
        q = rng.normal(size=5)
        vecs = {f"c{i:02d}": rng.normal(size=5) for i in range(20)}
        ranked = cbf_scores(q, sorted(vecs), table_of(vecs))
        expected = sorted(
            ((pid, cosine_oracle(q, v)) for pid, v in vecs.items()),
            key=lambda e: (-e[1], e[0]),
        )
        assert [e[0] for e in ranked.entries] == [e[0] for e in expected]
        for (_, got), (_, want) in zip(ranked.entries, expected):
            assert got == pytest.approx(want, abs=1e-12)

    def test_missing_candidates_skipped(self, rng):
        q = rng.normal(size=3)
        vecs = {"a": rng.normal(size=3)}
        ranked = cbf_scores(q, ["a", "ghost"], table_of(vecs))
        assert [e[0] for e in ranked.entries] == ["a"]

    def test_empty_candidates_rejected(self, rng):
        with pytest.raises(DataError):
            cbf_scores(rng.normal(size=3), [], table_of({"a": np.ones(3)}))


def year_corpus():
    papers = {
        "old": Paper("old", 2001, ("w",), ()),
        "mid": Paper("mid", 2005, ("w",), ()),
        "new": Paper("new", 2012, ("w",), ()),
        "q": Paper("q", 2010, ("w",), ()),
    }
    cfg = TimeSliceConfig(((2000, 2004), (2005, 2009), (2010, 2013)))
    return assign_slices(Corpus(papers=papers), cfg)


class TestCandidatePool:
    def test_default_excludes_future(self):
        corpus = year_corpus()
        pool = candidate_pool("q", 2010, corpus)
        assert "new" not in pool  # 2012 paper, query year 2010
        assert set(pool) == {"old", "mid"}

    def test_all_policy_excludes_only_query(self):
        corpus = year_corpus()
        pool = candidate_pool("q", 2010, corpus, policy="all")
        assert len(pool) == len(corpus) - 1 and "q" not in pool

    def test_explicit_verbatim_minus_query(self):
        corpus = year_corpus()
        pool = candidate_pool("q", 2010, corpus, policy="explicit",
                              explicit_ids=["new", "q", "old"])
        assert pool == ["new", "old"]

    def test_empty_pool_errors(self):
        corpus = year_corpus()
        with pytest.raises(DataError):
            candidate_pool("q", 2010, corpus, policy="explicit", explicit_ids=["q"])


class TestRerank:
    def test_zero_preference_halves_scores(self):
        base = RankedList("q", "cbf", [("a", 0.6), ("b", 0.4)])
        pref = np.array([0.0, 1.0])
        out = rerank_time_preference(base, pref, {"a": 0, "b": 0})
        assert dict(out.entries)["a"] == pytest.approx(0.3, abs=1e-12)
        assert dict(out.entries)["b"] == pytest.approx(0.2, abs=1e-12)

    def test_uniform_preference_preserves_order(self, rng):
        entries = sorted(
            ((f"c{i}", float(s)) for i, s in enumerate(rng.random(10))),
            key=lambda e: (-e[1], e[0]),
        )
        base = RankedList("q", "cbf", entries)
        slice_of = {f"c{i}": i % 3 for i in range(10)}
        out = rerank_time_preference(base, np.full(3, 1 / 3), slice_of)
        assert [e[0] for e in out.entries] == [e[0] for e in base.entries]

    def test_worked_value_with_paper_preference_entry(self):
        # S=0.8 weighted by the sigmoid of preference mass 0.282
        base = RankedList("q", "cbf", [("a", 0.8)])
        out = rerank_time_preference(base, np.array([0.282]), {"a": 0})
        assert out.entries[0][1] == pytest.approx(0.4560291857840444, abs=1e-12)
        assert out.entries[0][1] == pytest.approx(eq8_oracle(0.8, 0.282), abs=1e-15)

    def test_missing_slice_errors(self):
        base = RankedList("q", "cbf", [("a", 0.5)])
        with pytest.raises(DataError):
            rerank_time_preference(base, np.array([0.5, 0.5]), {})

    def test_slice_local_order_preserved(self, rng):
        for _ in range(20):
            n = 30
            entries = sorted(
                ((f"c{i:02d}", float(s)) for i, s in enumerate(rng.random(n))),
                key=lambda e: (-e[1], e[0]),
            )
            slice_of = {f"c{i:02d}": int(rng.integers(0, 4)) for i in range(n)}
            pref = rng.dirichlet(np.ones(4))
            base = RankedList("q", "cbf", entries)
            out = rerank_time_preference(base, pref, slice_of)
            base_pos = {pid: i for i, (pid, _) in enumerate(base.entries)}
            out_pos = {pid: i for i, (pid, _) in enumerate(out.entries)}
            for a in slice_of:
                for b in slice_of:
                    if a < b and slice_of[a] == slice_of[b]:
                        assert (base_pos[a] < base_pos[b]) == (out_pos[a] < out_pos[b])


@settings(max_examples=60, deadline=None)
@given(phat=st.floats(0.0, 1.0))
def test_eq8_multiplier_range(phat):
    base = RankedList("q", "cbf", [("a", 1.0)])
    out = rerank_time_preference(base, np.array([phat]), {"a": 0})
    w = out.entries[0][1]
    assert 0.5 <= w <= math.e / (1 + math.e) + 1e-12


@settings(max_examples=60, deadline=None)
@given(phat=st.floats(1e-12, 1.0))  # below float resolution sigmoid is flat at 0.5
def test_eq8_multiplier_strictly_increasing(phat):
    base = RankedList("q", "cbf", [("a", 1.0)])
    w = rerank_time_preference(base, np.array([phat]), {"a": 0}).entries[0][1]
    lower = rerank_time_preference(base, np.array([phat * 0.5]), {"a": 0}).entries[0][1]
    assert w > lower


class TestPubPreference:
    def test_gap_one_is_exactly_one(self):
        assert weight_pub_preference(2010, 2009, 0.8) == 1.0

    def test_same_year_is_sigma_to_the_seventh(self):
        got = weight_pub_preference(2010, 2010, 0.8)
        assert got == 0.8**7
        assert got == pytest.approx(0.2097152, abs=1e-15)

    def test_gap_beyond_twenty_clamps(self):
        assert weight_pub_preference(2030, 2005, 0.8) == 0.8**20
        assert weight_pub_preference(2050, 2005, 0.8) == 0.8**20

    def test_future_candidate_rejected(self):
        with pytest.raises(DataError):
            weight_pub_preference(2010, 2011, 0.8)

    def test_bad_sigma_rejected(self):
        with pytest.raises(DataError):
            weight_pub_preference(2010, 2009, 1.2)

    def test_matches_oracle_on_grid(self):
        for gap in range(0, 30):
            got = weight_pub_preference(2000 + gap, 2000, 0.85)
            assert got == pytest.approx(pub_preference_oracle(2000 + gap, 2000, 0.85),
                                        abs=1e-15)

    def test_strictly_decreasing_on_window_constant_after(self):
        weights = [weight_pub_preference(2000 + g, 2000, 0.8) for g in range(1, 21)]
        assert all(a > b for a, b in zip(weights, weights[1:]))
        assert weight_pub_preference(2000, 2000, 0.8) == weights[7]  # sigma^7 = gap-8


class TestFreshness:
    def test_age_zero_is_one(self):
        assert weight_freshness(0, 10.0) == 1.0

    def test_age_equal_tau_is_inverse_e(self):
        assert weight_freshness(10.0, 10.0) == pytest.approx(math.exp(-1), abs=1e-12)

    def test_matches_direct_evaluation(self):
        assert weight_freshness(10, 10) == pytest.approx(freshness_oracle(10, 10),
                                                         abs=1e-15)

    def test_negative_age_rejected(self):
        with pytest.raises(DataError):
            weight_freshness(-1, 10.0)

    def test_strictly_decreasing(self):
        ws = [weight_freshness(a, 7.0) for a in range(0, 30, 3)]
        assert all(a > b for a, b in zip(ws, ws[1:]))


class TestCiteRank:
    def test_two_cycle_splits_evenly(self):
        scores = citerank_weights([("a", "b"), ("b", "a")])
        assert scores["a"] == pytest.approx(0.5, abs=1e-9)
        assert scores["b"] == pytest.approx(0.5, abs=1e-9)

    def test_star_center_highest(self):
        scores = citerank_weights([("x", "center"), ("y", "center")])
        assert scores["center"] > scores["x"]
        assert scores["center"] > scores["y"]

    def test_matches_dense_solve_on_random_graphs(self, rng):
        nodes = [f"n{i}" for i in range(8)]
        for trial in range(5):
            edges = []
            for a in nodes:
                for b in nodes:
                    if a != b and rng.random() < 0.3:
                        edges.append((a, b))
            if not edges:
                continue
            got = citerank_weights(edges, nodes=nodes)
            expected = pagerank_oracle(edges, nodes)
            for n in nodes:
                assert got[n] == pytest.approx(expected[n], abs=1e-8)

    def test_scores_sum_to_one(self, rng):
        edges = [("a", "b"), ("b", "c"), ("c", "a"), ("d", "a")]
        scores = citerank_weights(edges)
        assert sum(scores.values()) == pytest.approx(1.0, abs=1e-9)

    def test_relabeling_invariance(self):
        edges = [("a", "b"), ("b", "c"), ("c", "a"), ("a", "c")]
        relabel = {"a": "x9", "b": "x2", "c": "x5"}
        base = citerank_weights(edges)
        moved = citerank_weights([(relabel[u], relabel[v]) for u, v in edges])
        for old, new in relabel.items():
            assert base[old] == pytest.approx(moved[new], abs=1e-12)

    def test_empty_graph_rejected(self):
        with pytest.raises(DataError):
            citerank_weights([])


class TestWhin:
    def test_paper_two_view_setting_accepted(self):
        got = whin_csl_score(0.9, 0.1, w1=0.6, w2=0.4)
        assert got == pytest.approx(0.6 * 0.9 + 0.4 * 0.1, abs=1e-15)

    def test_equal_views_collapse_to_common_value(self):
        assert whin_csl_score(0.7, 0.7, 0.2, 0.3, mu_author=0.7) == pytest.approx(0.7)
        assert whin_csl_score(0.7, 0.7, 0.5, 0.5) == pytest.approx(0.7)

    def test_two_view_requires_unit_weights(self):
        with pytest.raises(DataError, match="w1 \\+ w2 = 1"):
            whin_csl_score(0.5, 0.5, 0.6, 0.3)

    def test_matches_arithmetic_oracle(self, rng):
        for _ in range(20):
            mu1, mu2, mu3 = rng.random(3)
            w1 = float(rng.random() * 0.6)
            w2 = float(rng.random() * (1 - w1))
            got = whin_csl_score(mu1, mu2, w1, w2, mu_author=mu3)
            assert got == pytest.approx(whin_oracle(mu1, mu2, mu3, w1, w2), abs=1e-12)

    def test_invalid_weights_rejected(self):
        with pytest.raises(DataError):
            whin_csl_score(0.5, 0.5, 0.8, 0.4, mu_author=0.1)
        with pytest.raises(DataError):
            whin_csl_score(0.5, 0.5, -0.1, 1.1)


class TestApplyScheme:
    def base(self, rng, n=12):
        entries = sorted(
            ((f"c{i:02d}", float(s)) for i, s in enumerate(rng.random(n))),
            key=lambda e: (-e[1], e[0]),
        )
        return RankedList("q", "cbf", entries)

    def test_none_is_identity(self, rng):
        base = self.base(rng)
        out = apply_weight_scheme(base, WeightScheme(kind="none"), RankContext())
        assert out.entries == base.entries

    def test_equal_weights_preserve_order(self, rng):
        base = self.base(rng)
        years = {pid: 2005 for pid, _ in base.entries}
        out = apply_weight_scheme(
            base, WeightScheme(kind="freshness", tau_d=9.0),
            RankContext(query_year=2010, years=years),
        )
        assert [e[0] for e in out.entries] == [e[0] for e in base.entries]

    def test_pub_preference_matches_compose_oracle(self, rng):
        base = self.base(rng)
        years = {pid: int(2000 + rng.integers(0, 11)) for pid, _ in base.entries}
        out = apply_weight_scheme(
            base, WeightScheme(kind="pub_preference", sigma=0.8),
            RankContext(query_year=2010, years=years),
        )
        expected = sorted(
            (
                (pid, s * pub_preference_oracle(2010, years[pid], 0.8))
                for pid, s in base.entries
            ),
            key=lambda e: (-e[1], e[0]),
        )
        assert [e[0] for e in out.entries] == [e[0] for e in expected]
        for (_, got), (_, want) in zip(out.entries, expected):
            assert got == pytest.approx(want, abs=1e-12)

    def test_citerank_normalized_to_unit_interval(self, rng):
        base = self.base(rng, n=4)
        pagerank = {pid: float(rng.random()) for pid, _ in base.entries}
        out = apply_weight_scheme(
            base, WeightScheme(kind="citerank"), RankContext(pagerank=pagerank)
        )
        lo = min(pagerank.values())
        hi = max(pagerank.values())
        expected = sorted(
            (
                (pid, s * (pagerank[pid] - lo) / (hi - lo))
                for pid, s in base.entries
            ),
            key=lambda e: (-e[1], e[0]),
        )
        for (_, got), (_, want) in zip(out.entries, expected):
            assert got == pytest.approx(want, abs=1e-12)

    def test_missing_context_errors(self, rng):
        base = self.base(rng)
        with pytest.raises(DataError, match="query year"):
            apply_weight_scheme(base, WeightScheme(kind="freshness"), RankContext())
        with pytest.raises(DataError, match="preference"):
            apply_weight_scheme(base, WeightScheme(kind="time_preference"), RankContext())
        with pytest.raises(DataError, match="pagerank"):
            apply_weight_scheme(base, WeightScheme(kind="citerank"), RankContext())

    def test_every_output_validates(self, rng):
        base = self.base(rng)
        years = {pid: 2004 for pid, _ in base.entries}
        slice_of = {pid: 0 for pid, _ in base.entries}
        ctx = RankContext(
            query_year=2010, years=years, slice_of=slice_of,
            preference=np.array([1.0]),
            pagerank={pid: 0.1 for pid, _ in base.entries},
        )
        for kind in ("none", "time_preference", "citerank", "pub_preference", "freshness"):
            out = apply_weight_scheme(base, WeightScheme(kind=kind), ctx)
            out.validate()

    def test_unknown_scheme_rejected(self):
        with pytest.raises(DataError):
            WeightScheme(kind="mystery")


class TestRecommend:
    def make_setup(self, rng, n=30):
        papers = {}
        vecs = {}
        for i in range(n):
            pid = f"c{i:02d}"
            papers[pid] = Paper(pid, 2000 + (i % 3) * 3, ("w",), ())
            vecs[pid] = rng.normal(size=4)
        papers["q"] = Paper("q", 2008, ("w",), ())
        vecs["q"] = rng.normal(size=4)
        cfg = TimeSliceConfig(((2000, 2002), (2003, 2005), (2006, 2009)))
        corpus = assign_slices(Corpus(papers=papers), cfg)
        return corpus, table_of(vecs)

    def test_top_n_truncates(self, rng):
        corpus, table = self.make_setup(rng)
        ctx = RankContext()
        out = recommend("q", table["q"], 2008, corpus, table,
                        WeightScheme(kind="none"), ctx, top_n=5)
        assert len(out.entries) == 5
        out.validate(top_n=5)

    def test_top_n_larger_than_pool_ranks_everything(self, rng):
        corpus, table = self.make_setup(rng, n=10)
        out = recommend("q", table["q"], 2008, corpus, table,
                        WeightScheme(kind="none"), RankContext(), top_n=500)
        assert len(out.entries) == 10

    def test_time_preference_keeps_within_slice_order(self, rng):
        corpus, table = self.make_setup(rng)
        pref = np.array([0.6, 0.3, 0.1])
        ctx = RankContext(slice_of=corpus.slice_of, preference=pref)
        base = recommend("q", table["q"], 2008, corpus, table,
                         WeightScheme(kind="none"), RankContext(), top_n=100)
        weighted = recommend("q", table["q"], 2008, corpus, table,
                             WeightScheme(kind="time_preference"), ctx, top_n=100)
        pos_base = {pid: i for i, (pid, _) in enumerate(base.entries)}
        pos_new = {pid: i for i, (pid, _) in enumerate(weighted.entries)}
        for a in pos_base:
            for b in pos_base:
                if a < b and corpus.slice_of[a] == corpus.slice_of[b]:
                    assert (pos_base[a] < pos_base[b]) == (pos_new[a] < pos_new[b])


class TestRankedListInvariants:
    def test_duplicate_rejected(self):
        bad = RankedList("q", "m", [("a", 0.5), ("a", 0.4)])
        with pytest.raises(DataError):
            bad.validate()

    def test_out_of_order_rejected(self):
        bad = RankedList("q", "m", [("a", 0.4), ("b", 0.5)])
        with pytest.raises(DataError):
            bad.validate()

    def test_tie_order_by_id_enforced(self):
        bad = RankedList("q", "m", [("b", 0.5), ("a", 0.5)])
        with pytest.raises(DataError):
            bad.validate()
