"""Graph-node embeddings: second-order biased random walks feeding skip-gram
with negative sampling.

Citation edges are walked as undirected (directed walks die at sinks, and
citation graphs are nearly acyclic). The return bias 1/p, the shared-neighbor
bias 1, and the outward bias 1/q follow the usual second-order walk scheme.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from chronorec.embeddings.sgns import LossTrace, NegativeSampler, linear_lr, sgd_block
from chronorec.embeddings.table import EmbeddingTable
from chronorec.errors import DataError

log = logging.getLogger(__name__)


@dataclass
class WalkParams:
    num_walks: int = 10
    walk_length: int = 40
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    lr0: float = 0.025
    lr_min: float = 1e-4
    seed: int = 0


@dataclass
class NodeEmbeddingResult:
    table: EmbeddingTable
    isolated: list[str] = field(default_factory=list)
    loss_trace: LossTrace = field(default_factory=LossTrace)


def _undirected_adjacency(
    edges: list[tuple[str, str]], nodes: list[str] | None
) -> tuple[list[str], list[np.ndarray]]:
    """Sorted node list plus per-node sorted neighbor index arrays."""
    names = set(nodes or [])
    for a, b in edges:
        names.add(a)
        names.add(b)
    node_list = sorted(names)
    index = {n: i for i, n in enumerate(node_list)}
    neighbor_sets: list[set[int]] = [set() for _ in node_list]
    for a, b in edges:
        ia, ib = index[a], index[b]
        if ia == ib:
            continue
        neighbor_sets[ia].add(ib)
        neighbor_sets[ib].add(ia)
    adjacency = [np.array(sorted(s), dtype=np.intp) for s in neighbor_sets]
    return node_list, adjacency


def _step_weights(
    nbrs: np.ndarray, prev: int, prev_nbrs: np.ndarray, p: float, q: float
) -> np.ndarray:
    w = np.where(
        nbrs == prev,
        1.0 / p,
        np.where(np.isin(nbrs, prev_nbrs, assume_unique=True), 1.0, 1.0 / q),
    )
    return w


def biased_walks(
    edges: list[tuple[str, str]],
    p: float,
    q: float,
    params: WalkParams,
    nodes: list[str] | None = None,
) -> list[list[str]]:
    """All walks over the undirected graph, ``num_walks`` per non-isolated node."""
    node_list, adjacency = _undirected_adjacency(edges, nodes)
    rng = np.random.default_rng(params.seed)
    starts = [i for i, nbrs in enumerate(adjacency) if len(nbrs)]
    walks: list[list[str]] = []
    for _ in range(params.num_walks):
        order = rng.permutation(len(starts))
        for s in order:
            walk = _one_walk(starts[s], adjacency, p, q, params.walk_length, rng)
            walks.append([node_list[i] for i in walk])
    return walks


def _one_walk(
    start: int,
    adjacency: list[np.ndarray],
    p: float,
    q: float,
    length: int,
    rng: np.random.Generator,
) -> list[int]:
    walk = [start]
    while len(walk) < length:
        cur = walk[-1]
        nbrs = adjacency[cur]
        if len(nbrs) == 0:
            break
        if len(walk) == 1:
            nxt = int(nbrs[rng.integers(0, len(nbrs))])
        else:
            prev = walk[-2]
            w = _step_weights(nbrs, prev, adjacency[prev], p, q)
            cum = np.cumsum(w)
            r = rng.random() * cum[-1]
            nxt = int(nbrs[np.searchsorted(cum, r, side="right")])
        walk.append(nxt)
    return walk


def train_node_embeddings(
    edges: list[tuple[str, str]],
    dim: int = 100,
    p: float = 0.25,
    q: float = 0.25,
    params: WalkParams | None = None,
    nodes: list[str] | None = None,
) -> NodeEmbeddingResult:
    """Embed every node reached by an edge; isolated nodes (listed in
    ``nodes`` but edge-free) get random-init vectors and are flagged."""
    if not edges:
        raise DataError("cannot train node embeddings on an empty graph")
    if dim < 2:
        raise DataError(f"embedding dim must be >= 2, got {dim}")
    params = params or WalkParams()

    node_list, adjacency = _undirected_adjacency(edges, nodes)
    index = {n: i for i, n in enumerate(node_list)}
    rng = np.random.default_rng(params.seed)

    starts = [i for i, nbrs in enumerate(adjacency) if len(nbrs)]
    isolated = [node_list[i] for i in range(len(node_list)) if not len(adjacency[i])]
    if isolated:
        log.warning("%d isolated nodes get random-init vectors", len(isolated))

    # walk generation shares the rng stream with training: one seed, one run
    walks: list[np.ndarray] = []
    for _ in range(params.num_walks):
        order = rng.permutation(len(starts))
        for s in order:
            walk = _one_walk(starts[s], adjacency, p, q, params.walk_length, rng)
            walks.append(np.array(walk, dtype=np.intp))

    freq = np.zeros(len(node_list))
    for walk in walks:
        np.add.at(freq, walk, 1.0)
    sampler = NegativeSampler(np.maximum(freq, 1e-12))

    in_vecs = (rng.random((len(node_list), dim)) - 0.5) / dim
    out_vecs = np.zeros((len(node_list), dim))

    pairs = [_walk_pairs(walk, params.window) for walk in walks]
    result = NodeEmbeddingResult(
        table=EmbeddingTable(dim=dim, space="node"), isolated=isolated
    )
    total_steps = params.epochs * len(walks)
    step = 0
    for epoch in range(params.epochs):
        order = rng.permutation(len(walks))
        for j in order:
            centers, positives = pairs[j]
            if len(centers) == 0:
                continue
            negatives = sampler.draw(rng, (len(centers), params.negatives))
            lr = linear_lr(step, total_steps, params.lr0, params.lr_min)
            mean_loss = sgd_block(in_vecs, out_vecs, centers, positives, negatives, lr)
            result.loss_trace.add(epoch, mean_loss, len(centers))
            step += 1

    for i, name in enumerate(node_list):
        result.table.vectors[name] = in_vecs[i].copy()
    return result


def _walk_pairs(walk: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """(center, context) index pairs within the window, both directions."""
    centers: list[np.ndarray] = []
    contexts: list[np.ndarray] = []
    n = len(walk)
    for offset in range(1, window + 1):
        if offset >= n:
            break
        centers.append(walk[:-offset])
        contexts.append(walk[offset:])
        centers.append(walk[offset:])
        contexts.append(walk[:-offset])
    if not centers:
        empty = np.array([], dtype=np.intp)
        return empty, empty
    return np.concatenate(centers), np.concatenate(contexts)


def filter_test_edges(
    edges: list[tuple[str, str]], test_ids: set[str]
) -> list[tuple[str, str]]:
    """Drop citation links originating from held-out papers so the walk graph
    never sees test citing behavior."""
    return [(a, b) for a, b in edges if a not in test_ids]
