"""Document-vector training: distributed bag of words with negative sampling.

Each paper owns one trainable vector that predicts tokens sampled uniformly
from its abstract (no word order, no window). Word vectors live on the output
side only. New texts are embedded afterwards by gradient descent against the
frozen word parameters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from chronorec import binio
from chronorec.corpus import Corpus
from chronorec.embeddings.sgns import LossTrace, NegativeSampler, linear_lr, sgd_block
from chronorec.embeddings.table import EmbeddingTable
from chronorec.errors import DataError

log = logging.getLogger(__name__)

_MODEL_MAGIC = b"CRDOC1\n"


@dataclass
class DocVectorParams:
    dim: int = 100
    epochs: int = 5
    negatives: int = 5
    lr0: float = 0.025
    lr_min: float = 1e-4
    seed: int = 0


class DocVectorModel:
    """Trained document vectors plus the frozen word parameters needed to
    embed unseen text."""

    def __init__(
        self,
        params: DocVectorParams,
        vocab: list[str],
        counts: np.ndarray,
        doc_ids: list[str],
        doc_vecs: np.ndarray,
        word_out: np.ndarray,
        empty_docs: list[str],
    ) -> None:
        self.params = params
        self.vocab = vocab
        self.word_index = {w: i for i, w in enumerate(vocab)}
        self.counts = counts
        self.doc_ids = doc_ids
        self.doc_vecs = doc_vecs
        self.word_out = word_out
        self.empty_docs = empty_docs
        self.loss_trace: LossTrace = LossTrace()

    @property
    def table(self) -> EmbeddingTable:
        table = EmbeddingTable(dim=self.params.dim, space="content")
        for i, pid in enumerate(self.doc_ids):
            table.vectors[pid] = self.doc_vecs[i].copy()
        return table

    def mean_doc_vector(self) -> np.ndarray:
        return self.doc_vecs.mean(axis=0)

    def save(self, path: str | Path) -> None:
        with Path(path).open("wb") as fh:
            fh.write(_MODEL_MAGIC)
            binio.write_u64(fh, self.params.dim)
            binio.write_u64(fh, self.params.epochs)
            binio.write_u64(fh, self.params.negatives)
            binio.write_array(fh, np.array([self.params.lr0, self.params.lr_min]))
            binio.write_u64(fh, self.params.seed)
            binio.write_u64(fh, len(self.vocab))
            for word in self.vocab:
                binio.write_str(fh, word)
            binio.write_array(fh, self.counts)
            binio.write_u64(fh, len(self.doc_ids))
            for pid in self.doc_ids:
                binio.write_str(fh, pid)
            binio.write_array(fh, self.doc_vecs)
            binio.write_array(fh, self.word_out)
            binio.write_u64(fh, len(self.empty_docs))
            for pid in self.empty_docs:
                binio.write_str(fh, pid)

    @classmethod
    def load(cls, path: str | Path) -> "DocVectorModel":
        with Path(path).open("rb") as fh:
            binio.expect_magic(fh, _MODEL_MAGIC, "doc-vector model")
            dim = binio.read_u64(fh)
            epochs = binio.read_u64(fh)
            negatives = binio.read_u64(fh)
            lrs = binio.read_array(fh)
            seed = binio.read_u64(fh)
            params = DocVectorParams(
                dim=dim, epochs=epochs, negatives=negatives,
                lr0=float(lrs[0]), lr_min=float(lrs[1]), seed=seed,
            )
            vocab = [binio.read_str(fh) for _ in range(binio.read_u64(fh))]
            counts = binio.read_array(fh)
            doc_ids = [binio.read_str(fh) for _ in range(binio.read_u64(fh))]
            doc_vecs = binio.read_array(fh)
            word_out = binio.read_array(fh)
            empty = [binio.read_str(fh) for _ in range(binio.read_u64(fh))]
        return cls(params, vocab, counts, doc_ids, doc_vecs, word_out, empty)


def _init_vectors(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    return (rng.random((n, dim)) - 0.5) / dim


def train_content_embeddings(
    corpus: Corpus, dim: int = 100, params: DocVectorParams | None = None
) -> DocVectorModel:
    """Train one content vector per paper from abstract tokens only.

    Papers whose abstract tokenizes to nothing keep their random init and are
    listed in ``model.empty_docs``. Deterministic for a fixed seed.
    """
    if len(corpus) == 0:
        raise DataError("cannot train content embeddings on an empty corpus")
    if dim < 2:
        raise DataError(f"embedding dim must be >= 2, got {dim}")
    params = params or DocVectorParams()
    params.dim = dim

    doc_ids = list(corpus.papers)
    docs_tokens = [corpus.papers[pid].abstract for pid in doc_ids]

    vocab_counts: dict[str, int] = {}
    for tokens in docs_tokens:
        for tok in tokens:
            vocab_counts[tok] = vocab_counts.get(tok, 0) + 1
    vocab = sorted(vocab_counts)
    word_index = {w: i for i, w in enumerate(vocab)}
    counts = np.array([vocab_counts[w] for w in vocab], dtype=np.float64)

    rng = np.random.default_rng(params.seed)
    doc_vecs = _init_vectors(rng, len(doc_ids), dim)
    word_out = np.zeros((max(len(vocab), 1), dim))
    empty_docs = [pid for pid, toks in zip(doc_ids, docs_tokens) if not toks]
    if empty_docs:
        log.warning("%d papers have empty abstracts; random vectors kept", len(empty_docs))

    model = DocVectorModel(params, vocab, counts, doc_ids, doc_vecs, word_out, empty_docs)
    if not vocab:
        return model

    sampler = NegativeSampler(counts)
    token_idx = [
        np.array([word_index[t] for t in toks], dtype=np.intp) for toks in docs_tokens
    ]
    nonempty = [i for i, toks in enumerate(docs_tokens) if toks]
    total_steps = params.epochs * len(nonempty)
    step = 0
    for epoch in range(params.epochs):
        order = rng.permutation(len(nonempty))
        for j in order:
            doc = nonempty[j]
            toks = token_idx[doc]
            # the doc vector predicts a uniform-with-replacement resample of
            # its own tokens, one SGD update per sampled token
            positives = toks[rng.integers(0, len(toks), size=len(toks))]
            negatives = sampler.draw(rng, (len(positives), params.negatives))
            centers = np.full(len(positives), doc, dtype=np.intp)
            lr = linear_lr(step, total_steps, params.lr0, params.lr_min)
            mean_loss = sgd_block(doc_vecs, word_out, centers, positives, negatives, lr)
            model.loss_trace.add(epoch, mean_loss, len(positives))
            step += 1
    return model


@dataclass
class InferenceResult:
    vector: np.ndarray
    oov_fallback: bool


def infer_content_embedding(
    tokens: tuple[str, ...] | list[str],
    model: DocVectorModel,
    seed: int = 0,
    epochs: int = 20,
) -> InferenceResult:
    """Fit a fresh document vector against the frozen word parameters.

    Out-of-vocabulary tokens are dropped. If nothing remains, the mean of the
    training document vectors is returned with ``oov_fallback=True``.
    """
    known = np.array(
        [model.word_index[t] for t in tokens if t in model.word_index], dtype=np.intp
    )
    if len(known) == 0:
        log.warning("inference text has no in-vocabulary tokens; using mean vector")
        return InferenceResult(vector=model.mean_doc_vector(), oov_fallback=True)

    rng = np.random.default_rng(seed)
    vec = _init_vectors(rng, 1, model.params.dim)
    sampler = NegativeSampler(model.counts)
    centers = np.zeros(len(known), dtype=np.intp)
    for step in range(epochs):
        positives = known[rng.integers(0, len(known), size=len(known))]
        negatives = sampler.draw(rng, (len(positives), model.params.negatives))
        lr = linear_lr(step, epochs, model.params.lr0, model.params.lr_min)
        # word parameters stay frozen; only the new doc vector moves
        sgd_block(vec, model.word_out, centers, positives, negatives, lr,
                  update_outputs=False)
    return InferenceResult(vector=vec[0], oov_fallback=False)
