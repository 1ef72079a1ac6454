import numpy as np
import pytest

from chronorec.corpus import is_valid_preference, load_corpus, save_corpus, true_time_preference
from chronorec.errors import DataError
from chronorec.synth import SynthConfig, _topic_vocabularies, generate, planted_truth


def small_config(**kwargs):
    defaults = dict(
        topics=2, slices=3, papers_per_slice=40, vocab_per_topic=30,
        background_vocab=20, citation_budget=6, abstract_min=10, abstract_max=20,
        seed=5,
    )
    defaults.update(kwargs)
    return SynthConfig(**defaults)


class TestGenerate:
    def test_planted_profile_forces_reference_slices(self):
        cfg = SynthConfig(
            topics=1, slices=2, papers_per_slice=30, vocab_per_topic=30,
            background_vocab=10, citation_budget=5, abstract_min=10,
            abstract_max=15, profiles=[[1.0, 0.0]], seed=1,
        )
        result = generate(cfg)
        corpus = result.corpus
        for pid, paper in corpus.papers.items():
            if corpus.slice_of[pid] == 1:
                assert paper.references, pid
                for cited, _ in paper.references:
                    assert corpus.slice_of[cited] == 0

    def test_zero_drift_keeps_vocabulary_constant(self):
        cfg = small_config(drift_rate=0.0)
        vocab = _topic_vocabularies(cfg, np.random.default_rng(0))
        for per_slice in vocab:
            for later in per_slice[1:]:
                assert later == per_slice[0]

    def test_full_drift_replaces_everything(self):
        cfg = small_config(drift_rate=1.0)
        vocab = _topic_vocabularies(cfg, np.random.default_rng(0))
        assert set(vocab[0][0]).isdisjoint(vocab[0][1])

    def test_empirical_histogram_matches_planted_profile(self):
        # default-size corpus; last-slice papers see the full planted shape
        result = generate(SynthConfig(seed=3))
        corpus = result.corpus
        last = corpus.num_slices - 1
        for topic in range(result.profiles.shape[0]):
            counts = np.zeros(corpus.num_slices)
            for pid, paper in corpus.papers.items():
                if result.topic_of[pid] != topic or corpus.slice_of[pid] != last:
                    continue
                for cited, _ in paper.references:
                    counts[corpus.slice_of[cited]] += 1
            empirical = counts / counts.sum()
            tv = 0.5 * np.abs(empirical - result.profiles[topic]).sum()
            assert tv < 0.05, f"topic {topic}: tv={tv:.3f}"

    def test_corpus_invariants_hold(self):
        result = generate(small_config())
        corpus = result.corpus
        for pid, paper in corpus.papers.items():
            assert corpus.slice_of[pid] == corpus.config.slice_of_year(paper.year)
            seen = set()
            for cited, count in paper.references:
                assert cited in corpus.papers
                assert cited != pid
                assert count >= 1
                assert cited not in seen
                seen.add(cited)
                # never cite forward in time (slice granularity)
                assert corpus.slice_of[cited] <= corpus.slice_of[pid]
        if corpus.papers:
            prefs = [
                true_time_preference(p, corpus)
                for p in corpus.papers.values()
                if p.references
            ]
            assert all(is_valid_preference(p) for p in prefs)

    def test_same_seed_bitwise_identical_files(self, tmp_path):
        for name in ("one", "two"):
            result = generate(small_config(seed=9))
            save_corpus(result.corpus, tmp_path / f"{name}.jsonl")
        assert (tmp_path / "one.jsonl").read_bytes() == (tmp_path / "two.jsonl").read_bytes()

    def test_different_seed_differs(self, tmp_path):
        a = generate(small_config(seed=1))
        b = generate(small_config(seed=2))
        save_corpus(a.corpus, tmp_path / "a.jsonl")
        save_corpus(b.corpus, tmp_path / "b.jsonl")
        assert (tmp_path / "a.jsonl").read_bytes() != (tmp_path / "b.jsonl").read_bytes()

    def test_generated_file_loads_cleanly(self, tmp_path):
        result = generate(small_config())
        save_corpus(result.corpus, tmp_path / "c.jsonl")
        loaded = load_corpus(tmp_path / "c.jsonl")
        assert loaded.dropped_edges == 0
        assert len(loaded) == len(result.corpus)

    def test_bad_config_rejected(self):
        with pytest.raises(DataError):
            SynthConfig(topics=0)
        with pytest.raises(DataError):
            SynthConfig(drift_rate=1.5)
        with pytest.raises(DataError):
            SynthConfig(topics=2, slices=3, profiles=[[1.0, 0.0, 0.0]])


class TestPlantedTruth:
    def test_truth_equals_reference_lists(self):
        result = generate(small_config())
        truth, prefs = planted_truth(result)
        for qid, grades in truth.items():
            paper = result.corpus.papers[qid]
            assert grades == {cited: c for cited, c in paper.references}
            assert is_valid_preference(prefs[qid])
            assert np.allclose(
                prefs[qid], true_time_preference(paper, result.corpus), atol=0
            )

    def test_empty_query_set_gives_empty_truth(self):
        result = generate(small_config())
        truth, prefs = planted_truth(result, query_ids=[])
        assert truth == {} and prefs == {}

    def test_subset_of_queries(self):
        result = generate(small_config())
        some = [pid for pid, p in result.corpus.papers.items() if p.references][:5]
        truth, _ = planted_truth(result, query_ids=some)
        assert sorted(truth) == sorted(some)
