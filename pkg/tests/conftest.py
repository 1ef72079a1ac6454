import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from chronorec.corpus import Corpus, Paper, TimeSliceConfig, assign_slices


def make_paper(pid, year, abstract="alpha beta gamma", refs=()):
    return Paper(
        id=pid,
        year=year,
        abstract=tuple(abstract.split()),
        references=tuple(refs),
    )


def make_corpus(papers, intervals=None):
    corpus = Corpus(papers={p.id: p for p in papers})
    if intervals is not None:
        corpus = assign_slices(corpus, TimeSliceConfig(tuple(intervals)))
    return corpus


def write_corpus_file(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


@pytest.fixture
def two_slice_corpus():
    papers = [
        make_paper("a", 2001, refs=[("b", 1), ("c", 2)]),
        make_paper("b", 2000),
        make_paper("c", 2003),
        make_paper("d", 2004, refs=[("a", 3)]),
    ]
    return make_corpus(papers, intervals=[(2000, 2002), (2003, 2004)])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def small_pipeline_config(seed=0):
    """Desk-test pipeline config: ~300 papers, small dims, quick stages."""
    from chronorec.config import PipelineConfig

    cfg = PipelineConfig(seed=seed)
    cfg.synth.topics = 4
    cfg.synth.slices = 5
    cfg.synth.papers_per_slice = 60
    cfg.synth.vocab_per_topic = 80
    cfg.synth.background_vocab = 60
    cfg.synth.citation_budget = 15
    cfg.synth.abstract_min = 20
    cfg.synth.abstract_max = 40
    cfg.split.min_refs = 6
    cfg.split.min_slices = 2
    cfg.split.test_size = 20
    cfg.embed.dim = 32
    cfg.embed.docvec_epochs = 6
    cfg.embed.num_walks = 2
    cfg.embed.walk_length = 10
    cfg.embed.window = 3
    cfg.embed.node_epochs = 1
    cfg.profile.k = 8
    cfg.train.epochs = 8
    cfg.rank.top_n = 100
    return cfg


def run_small_pipeline(ws, seed=0, methods=None):
    from chronorec import pipeline

    cfg = small_pipeline_config(seed)
    if methods:
        cfg.rank.methods = methods
    pipeline.cmd_synth(ws, cfg)
    pipeline.cmd_slices(ws, cfg)
    pipeline.cmd_embed(ws, cfg)
    pipeline.cmd_profile(ws, cfg)
    pipeline.cmd_train(ws, cfg)
    pipeline.cmd_recommend(ws, cfg)
    pipeline.cmd_evaluate(ws, cfg)
    return cfg


@pytest.fixture(scope="session")
def prepared_workspace(tmp_path_factory):
    """A fully-run small pipeline workspace, shared across tests."""
    ws = tmp_path_factory.mktemp("ws_prepared")
    cfg = run_small_pipeline(ws)
    return ws, cfg
