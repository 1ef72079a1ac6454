"""Candidate generation by content similarity and re-ranking under the
various time/structure weighting schemes.

The main model multiplies each content score by a sigmoid of the predicted
preference mass on the candidate's slice, which is order-preserving within a
slice. The comparison schemes (citation-graph rank, publication-time
preference, freshness) are multiplicative weights as well; the multi-view
linear combination replaces the score instead, since it is an additive blend
of similarity views rather than a weight.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from chronorec.corpus import Corpus
from chronorec.embeddings.table import EmbeddingTable, cosine_against_matrix, cosine_similarity
from chronorec.errors import DataError

log = logging.getLogger(__name__)

DEFAULT_TOP_N = 500
PAGERANK_DAMPING = 0.85
PAGERANK_TOL = 1e-10
PAGERANK_MAX_ITER = 200


@dataclass
class RankedList:
    """Descending-score list with ascending-id tie-break; no duplicate ids."""

    query_id: str
    method: str
    entries: list[tuple[str, float]]

    def ids(self) -> list[str]:
        return [pid for pid, _ in self.entries]

    def validate(self, top_n: int | None = None) -> None:
        seen = set()
        prev: tuple[float, str] | None = None
        for pid, score in self.entries:
            if pid in seen:
                raise DataError(f"duplicate id {pid!r} in ranked list")
            seen.add(pid)
            key = (-score, pid)
            if prev is not None and key < prev:
                raise DataError(f"ranked list out of order at {pid!r}")
            prev = key
        if top_n is not None and len(self.entries) > top_n:
            raise DataError(f"ranked list longer than top_n={top_n}")


def _sort_pairs(pairs: list[tuple[str, float]]) -> list[tuple[str, float]]:
    return sorted(pairs, key=lambda e: (-e[1], e[0]))


def candidate_pool(
    query_id: str,
    query_year: int,
    corpus: Corpus,
    policy: str = "on_or_before",
    explicit_ids: list[str] | None = None,
) -> list[str]:
    """Ids eligible for recommendation for one query, never including the
    query itself. Policies: ``all``, ``on_or_before`` (publication year at or
    before the query's), ``explicit``."""
    if policy == "explicit":
        if explicit_ids is None:
            raise DataError("explicit pool policy needs an id list")
        pool = [pid for pid in explicit_ids if pid != query_id]
    elif policy == "all":
        pool = [pid for pid in corpus.papers if pid != query_id]
    elif policy == "on_or_before":
        pool = [
            pid
            for pid, paper in corpus.papers.items()
            if pid != query_id and paper.year <= query_year
        ]
    else:
        raise DataError(f"unknown candidate pool policy {policy!r}")
    if not pool:
        raise DataError(f"candidate pool for {query_id!r} is empty")
    return pool


def cbf_scores(
    query_vec: np.ndarray,
    candidates: list[str],
    content_table: EmbeddingTable,
    query_id: str = "",
) -> RankedList:
    """Content-similarity ranking of the full candidate set (untruncated).

    Candidates missing from the table are skipped with a counter.
    """
    if not candidates:
        raise DataError("cbf_scores needs a non-empty candidate set")
    present = [pid for pid in candidates if pid in content_table]
    skipped = len(candidates) - len(present)
    if skipped:
        log.warning("cbf: %d candidates missing from the content table", skipped)
    sims = cosine_against_matrix(
        np.asarray(query_vec, dtype=np.float64), content_table.matrix(present)
    )
    entries = _sort_pairs(list(zip(present, sims.tolist())))
    return RankedList(query_id=query_id, method="cbf", entries=entries)


def _stable_sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    ex = np.exp(x)
    return float(ex / (1.0 + ex))


def rerank_time_preference(
    base: RankedList, pref: np.ndarray, slice_of: dict[str, int]
) -> RankedList:
    """Multiply each score by sigmoid(pref[candidate slice]) and re-sort."""
    pref = np.asarray(pref, dtype=np.float64)
    weights = [_stable_sigmoid(float(p)) for p in pref]
    entries = []
    for pid, score in base.entries:
        if pid not in slice_of:
            raise DataError(f"candidate {pid!r} has no slice assignment")
        entries.append((pid, score * weights[slice_of[pid]]))
    return RankedList(
        query_id=base.query_id, method="time_preference", entries=_sort_pairs(entries)
    )


def weight_pub_preference(y_t: int, y_c: int, sigma: float) -> float:
    """Piecewise publication-age weight: sigma^7 for the same year,
    sigma^(gap-1) for gaps of 1..20 years, sigma^20 beyond."""
    if not (0.0 < sigma < 1.0):
        raise DataError(f"sigma must lie in (0, 1), got {sigma}")
    if y_c > y_t:
        raise DataError(f"candidate year {y_c} is after target year {y_t}")
    gap = y_t - y_c
    if gap == 0:
        return sigma**7
    if gap <= 20:
        return sigma ** (gap - 1)
    return sigma**20


def weight_freshness(age: float, tau_d: float) -> float:
    """Exponential decay exp(-age / tau_d); 1.0 at age zero."""
    if tau_d <= 0:
        raise DataError(f"tau_d must be > 0, got {tau_d}")
    if age < 0:
        raise DataError(f"age must be >= 0, got {age}")
    return float(np.exp(-age / tau_d))


def citerank_weights(
    edges: list[tuple[str, str]],
    damping: float = PAGERANK_DAMPING,
    tol: float = PAGERANK_TOL,
    max_iter: int = PAGERANK_MAX_ITER,
    nodes: list[str] | None = None,
) -> dict[str, float]:
    """Power-iteration PageRank over the directed citation graph.

    Rank mass flows from citing to cited papers; dangling mass is spread
    uniformly. Scores sum to 1. Non-convergence within ``max_iter`` returns
    the last iterate with a logged warning.
    """
    if not edges and not nodes:
        raise DataError("citerank needs a non-empty graph")
    names = set(nodes or [])
    for a, b in edges:
        names.add(a)
        names.add(b)
    node_list = sorted(names)
    index = {n: i for i, n in enumerate(node_list)}
    n = len(node_list)
    src = np.array([index[a] for a, _ in edges], dtype=np.intp)
    dst = np.array([index[b] for _, b in edges], dtype=np.intp)
    out_deg = np.zeros(n)
    np.add.at(out_deg, src, 1.0)

    rank = np.full(n, 1.0 / n)
    converged = False
    for _ in range(max_iter):
        contrib = np.zeros(n)
        if len(src):
            np.add.at(contrib, dst, rank[src] / out_deg[src])
        dangling = rank[out_deg == 0].sum()
        new_rank = (1.0 - damping) / n + damping * (contrib + dangling / n)
        if np.abs(new_rank - rank).sum() < tol:
            rank = new_rank
            converged = True
            break
        rank = new_rank
    if not converged:
        log.warning("pagerank did not converge within %d iterations", max_iter)
    return {name: float(rank[i]) for i, name in enumerate(node_list)}


def whin_csl_score(
    mu_content: float,
    mu_node: float,
    w1: float,
    w2: float,
    mu_author: float | None = None,
) -> float:
    """Linear combination of similarity views: w1*content + w2*node
    (+ (1-w1-w2)*author when author data exists).

    Without the author view the two weights must sum to 1.
    """
    if w1 < 0 or w2 < 0 or w1 + w2 > 1.0 + 1e-12:
        raise DataError(f"view weights invalid: w1={w1}, w2={w2}")
    if mu_author is None:
        if abs(w1 + w2 - 1.0) > 1e-9:
            raise DataError(
                f"two-view mode requires w1 + w2 = 1, got {w1} + {w2}"
            )
        return w1 * mu_content + w2 * mu_node
    return w1 * mu_content + w2 * mu_node + (1.0 - w1 - w2) * mu_author


@dataclass
class WeightScheme:
    """Tagged weighting choice for re-ranking a content-similarity list."""

    kind: str  # none | time_preference | citerank | pub_preference | freshness | whin_csl
    sigma: float = 0.8
    tau_d: float = 10.0
    w1: float = 0.6
    w2: float = 0.4
    raw_preference: bool = False  # ablation: weight by p-hat itself, no sigmoid

    KINDS = ("none", "time_preference", "citerank", "pub_preference", "freshness", "whin_csl")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise DataError(f"unknown weight scheme {self.kind!r}")
        if self.kind == "pub_preference" and not (0.0 < self.sigma < 1.0):
            raise DataError(f"sigma must lie in (0, 1), got {self.sigma}")
        if self.kind == "freshness" and self.tau_d <= 0:
            raise DataError(f"tau_d must be > 0, got {self.tau_d}")
        if self.kind == "whin_csl":
            if self.w1 < 0 or self.w2 < 0 or self.w1 + self.w2 > 1.0 + 1e-12:
                raise DataError(f"view weights invalid: w1={self.w1}, w2={self.w2}")


@dataclass
class RankContext:
    """Everything the schemes may consult about the query and the corpus."""

    query_year: int | None = None
    slice_of: dict[str, int] = field(default_factory=dict)
    years: dict[str, int] = field(default_factory=dict)
    preference: np.ndarray | None = None
    pagerank: dict[str, float] | None = None
    query_node_vec: np.ndarray | None = None
    node_table: EmbeddingTable | None = None
    author_view: dict[str, float] | None = None


def apply_weight_scheme(
    base: RankedList, scheme: WeightScheme, ctx: RankContext
) -> RankedList:
    """Re-rank a content-similarity list under one weighting scheme."""
    if scheme.kind == "none":
        return RankedList(query_id=base.query_id, method="cbf", entries=list(base.entries))

    if scheme.kind == "time_preference":
        if ctx.preference is None:
            raise DataError("time_preference scheme needs a predicted preference")
        if scheme.raw_preference:
            pref = np.asarray(ctx.preference, dtype=np.float64)
            entries = [
                (pid, score * float(pref[_slice_for(pid, ctx)]))
                for pid, score in base.entries
            ]
            return RankedList(base.query_id, "time_preference_raw", _sort_pairs(entries))
        return rerank_time_preference(base, ctx.preference, ctx.slice_of)

    if scheme.kind == "citerank":
        if ctx.pagerank is None:
            raise DataError("citerank scheme needs pagerank scores")
        scores = np.array([ctx.pagerank.get(pid, 0.0) for pid, _ in base.entries])
        lo, hi = scores.min(), scores.max()
        norm = (scores - lo) / (hi - lo) if hi > lo else np.ones_like(scores)
        entries = [
            (pid, score * float(w))
            for (pid, score), w in zip(base.entries, norm)
        ]
        return RankedList(base.query_id, "citerank", _sort_pairs(entries))

    if scheme.kind == "pub_preference":
        if ctx.query_year is None:
            raise DataError("pub_preference scheme needs the query year")
        entries = [
            (pid, score * weight_pub_preference(ctx.query_year, _year_for(pid, ctx), scheme.sigma))
            for pid, score in base.entries
        ]
        return RankedList(base.query_id, "pub_preference", _sort_pairs(entries))

    if scheme.kind == "freshness":
        if ctx.query_year is None:
            raise DataError("freshness scheme needs the query year")
        entries = [
            (pid, score * weight_freshness(ctx.query_year - _year_for(pid, ctx), scheme.tau_d))
            for pid, score in base.entries
        ]
        return RankedList(base.query_id, "freshness", _sort_pairs(entries))

    # whin_csl: additive blend of views replaces the score
    if ctx.query_node_vec is None or ctx.node_table is None:
        raise DataError("whin_csl scheme needs the query node vector and node table")
    entries = []
    for pid, mu1 in base.entries:
        node_vec = ctx.node_table.get(pid)
        mu2 = (
            cosine_similarity(ctx.query_node_vec, node_vec)
            if node_vec is not None
            else 0.0
        )
        mu3 = ctx.author_view.get(pid, 0.0) if ctx.author_view is not None else None
        entries.append((pid, whin_csl_score(mu1, mu2, scheme.w1, scheme.w2, mu3)))
    return RankedList(base.query_id, "whin_csl", _sort_pairs(entries))


def _year_for(pid: str, ctx: RankContext) -> int:
    if pid not in ctx.years:
        raise DataError(f"candidate {pid!r} has no year in the rank context")
    return ctx.years[pid]


def _slice_for(pid: str, ctx: RankContext) -> int:
    if pid not in ctx.slice_of:
        raise DataError(f"candidate {pid!r} has no slice assignment")
    return ctx.slice_of[pid]


def recommend(
    query_id: str,
    query_vec: np.ndarray,
    query_year: int,
    corpus: Corpus,
    content_table: EmbeddingTable,
    scheme: WeightScheme,
    ctx: RankContext,
    top_n: int = DEFAULT_TOP_N,
    pool_policy: str = "on_or_before",
    explicit_pool: list[str] | None = None,
) -> RankedList:
    """Pool, score by content similarity, weight, truncate."""
    pool = candidate_pool(query_id, query_year, corpus, pool_policy, explicit_pool)
    base = cbf_scores(query_vec, pool, content_table, query_id=query_id)
    weighted = apply_weight_scheme(base, scheme, ctx)
    return RankedList(
        query_id=weighted.query_id,
        method=weighted.method,
        entries=weighted.entries[:top_n],
    )
