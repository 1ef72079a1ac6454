"""Query profiling: the MLP input pair.

A query's profile is its content vector plus the average-pooled node vector
of its k nearest same-slice neighbors by content cosine. Neighbor search is
an exhaustive per-slice scan; the corpora this targets are small enough that
an ANN index would be overhead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from chronorec.corpus import Corpus
from chronorec.embeddings.docvec import DocVectorModel, infer_content_embedding
from chronorec.embeddings.table import (
    EmbeddingTable,
    MaxAbsScaler,
    cosine_against_matrix,
)
from chronorec.errors import DataError

log = logging.getLogger(__name__)


@dataclass
class QueryProfile:
    x_content: np.ndarray
    x_node: np.ndarray
    query_slice: int
    neighbor_ids: list[str] = field(default_factory=list)


def nearest_neighbors(
    query_vec: np.ndarray,
    corpus: Corpus,
    table: EmbeddingTable,
    slice_index: int,
    k: int,
    exclude: str | None = None,
) -> list[str]:
    """The k highest-cosine papers of one slice, descending similarity, ties
    broken by ascending id. Returns fewer than k if the slice is smaller."""
    if k < 1:
        raise DataError(f"neighbor count k must be >= 1, got {k}")
    candidates = sorted(
        pid
        for pid in corpus.papers_in_slice(slice_index)
        if pid != exclude and pid in table
    )
    if not candidates:
        raise DataError(f"slice {slice_index} has no candidate papers")
    sims = cosine_against_matrix(np.asarray(query_vec, dtype=np.float64),
                                 table.matrix(candidates))
    # candidates are pre-sorted by id, so a stable sort on -sim gives the
    # ascending-id tie-break for free
    order = np.argsort(-sims, kind="stable")
    return [candidates[i] for i in order[:k]]


def pool_node_embedding(
    neighbor_ids: list[str], node_table: EmbeddingTable
) -> np.ndarray:
    """Element-wise mean of the neighbors' node vectors. Neighbors without a
    node vector are skipped; if none remain, a zero vector is returned and
    flagged in the log."""
    vecs = [node_table[pid] for pid in neighbor_ids if pid in node_table]
    if not vecs:
        log.warning("no neighbor has a node vector; pooling to zeros")
        return np.zeros(node_table.dim)
    return np.mean(vecs, axis=0)


def build_profile(
    query_tokens: tuple[str, ...] | list[str],
    query_year: int,
    corpus: Corpus,
    content_model: DocVectorModel,
    content_table: EmbeddingTable,
    node_table: EmbeddingTable,
    k: int,
    content_scaler: MaxAbsScaler | None = None,
    node_scaler: MaxAbsScaler | None = None,
    query_id: str | None = None,
    seed: int = 0,
    infer_epochs: int = 20,
    search_table: EmbeddingTable | None = None,
    search_scaler: MaxAbsScaler | None = None,
) -> QueryProfile:
    """Assemble the MLP input for one query.

    The slice is chosen by the query's year. When ``query_id`` names a corpus
    paper, its trained content vector is used and it is excluded from its own
    neighbor set; otherwise a vector is inferred from the tokens.
    ``content_scaler``/``node_scaler`` apply to the returned features only.
    Neighbor search runs on raw vectors by default; passing a pre-scaled
    ``search_table`` with its ``search_scaler`` switches the search to the
    scaled space instead.
    """
    if corpus.config is None:
        raise DataError("corpus has no slice assignment")
    query_slice = corpus.config.slice_of_year(query_year)

    if query_id is not None and query_id in content_table:
        x_content = np.array(content_table[query_id], copy=True)
    else:
        x_content = infer_content_embedding(
            query_tokens, content_model, seed=seed, epochs=infer_epochs
        ).vector

    table_for_search = search_table if search_table is not None else content_table
    search_vec = search_scaler.apply(x_content) if search_scaler else x_content
    neighbor_ids = nearest_neighbors(
        search_vec, corpus, table_for_search, query_slice, k, exclude=query_id
    )
    x_node = pool_node_embedding(neighbor_ids, node_table)

    if content_scaler is not None:
        x_content = content_scaler.apply(x_content)
    if node_scaler is not None:
        x_node = node_scaler.apply(x_node)
    return QueryProfile(
        x_content=x_content,
        x_node=x_node,
        query_slice=query_slice,
        neighbor_ids=neighbor_ids,
    )
