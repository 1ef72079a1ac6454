"""Ranking-quality metrics and the evaluation report.

Binary relevance (membership in the reference list) drives MAP, MRR, P@N and
R@N; the citing counts grade relevance for NDCG only. The DCG discount is
1/log2(rank+1) with ranks starting at 1, the convention of the standard
evaluation tooling for retrieval runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from chronorec.errors import DataError
from chronorec.ranker import RankedList

# per query: cited id -> relevance grade (citing count, >= 1)
QueryTruth = dict[str, int]
GroundTruth = dict[str, QueryTruth]

DEFAULT_CUTOFFS = (30, 100)
DEFAULT_PR_CUTOFF = 30


def average_precision(
    ranked: RankedList, truth: QueryTruth, cutoff: int | None = None
) -> float:
    """Mean of precision-at-hit over relevant ranks, normalized by
    min(|truth|, cutoff)."""
    if not truth:
        raise DataError("average_precision needs non-empty truth")
    limit = len(ranked.entries) if cutoff is None else min(cutoff, len(ranked.entries))
    hits = 0
    total = 0.0
    for rank, (pid, _) in enumerate(ranked.entries[:limit], start=1):
        if pid in truth:
            hits += 1
            total += hits / rank
    denom = len(truth) if cutoff is None else min(len(truth), cutoff)
    return total / denom


def ndcg(ranked: RankedList, truth: QueryTruth, cutoff: int | None = None) -> float:
    """DCG over the ranked grades divided by the ideal DCG of the truth."""
    if not truth:
        raise DataError("ndcg needs non-empty truth")
    limit = len(ranked.entries) if cutoff is None else min(cutoff, len(ranked.entries))
    dcg = 0.0
    for rank, (pid, _) in enumerate(ranked.entries[:limit], start=1):
        if pid in truth:
            dcg += truth[pid] / math.log2(rank + 1)
    ideal_grades = sorted(truth.values(), reverse=True)
    if cutoff is not None:
        ideal_grades = ideal_grades[:cutoff]
    idcg = sum(g / math.log2(i + 1) for i, g in enumerate(ideal_grades, start=1))
    return dcg / idcg if idcg > 0 else 0.0


def reciprocal_rank(ranked: RankedList, truth: QueryTruth) -> float:
    """1/rank of the first relevant item; 0 when none is retrieved."""
    if not truth:
        raise DataError("reciprocal_rank needs non-empty truth")
    for rank, (pid, _) in enumerate(ranked.entries, start=1):
        if pid in truth:
            return 1.0 / rank
    return 0.0


def precision_at(ranked: RankedList, truth: QueryTruth, n: int) -> float:
    if n < 1:
        raise DataError(f"cutoff N must be >= 1, got {n}")
    top = ranked.entries[:n]
    return sum(1 for pid, _ in top if pid in truth) / n


def recall_at(ranked: RankedList, truth: QueryTruth, n: int) -> float:
    if n < 1:
        raise DataError(f"cutoff N must be >= 1, got {n}")
    if not truth:
        raise DataError("recall_at needs non-empty truth")
    top = ranked.entries[:n]
    return sum(1 for pid, _ in top if pid in truth) / len(truth)


@dataclass
class EvalReport:
    """Macro-averaged metrics per method, in the headline table layout."""

    columns: list[str]
    rows: dict[str, dict[str, float]] = field(default_factory=dict)
    num_queries: int = 0

    def render_table(self) -> str:
        width = max([len("Method")] + [len(m) for m in self.rows]) + 2
        cols = [f"{c:>10}" for c in self.columns]
        lines = [f"{'Method':<{width}}" + "".join(cols)]
        for method, values in self.rows.items():
            cells = "".join(f"{values[c]:>10.4f}" for c in self.columns)
            lines.append(f"{method:<{width}}" + cells)
        return "\n".join(lines) + "\n"

    def render_kv(self) -> str:
        lines = [f"num_queries={self.num_queries}"]
        for method, values in self.rows.items():
            for col in self.columns:
                lines.append(f"{method}\t{col}\t{values[col]:.10f}")
        return "\n".join(lines) + "\n"


def evaluate(
    runs: dict[str, dict[str, RankedList]],
    truth: GroundTruth,
    ap_cutoffs: tuple[int, ...] = DEFAULT_CUTOFFS,
    ndcg_cutoffs: tuple[int, ...] = DEFAULT_CUTOFFS,
    pr_cutoff: int = DEFAULT_PR_CUTOFF,
) -> EvalReport:
    """Macro-average every metric over the truth's queries for each method."""
    if not truth:
        raise DataError("evaluate needs at least one query with truth")
    columns = (
        ["MAP", "NDCG", "MRR", f"P@{pr_cutoff}", f"R@{pr_cutoff}"]
        + [f"MAP@{c}" for c in ap_cutoffs]
        + [f"NDCG@{c}" for c in ndcg_cutoffs]
    )
    report = EvalReport(columns=columns, num_queries=len(truth))
    qids = sorted(truth)
    for method, per_query in runs.items():
        missing = [q for q in qids if q not in per_query]
        if missing:
            raise DataError(f"run {method!r} is missing queries: {missing[:5]}")
        sums = {c: 0.0 for c in columns}
        for qid in qids:
            ranked = per_query[qid]
            qt = truth[qid]
            sums["MAP"] += average_precision(ranked, qt)
            sums["NDCG"] += ndcg(ranked, qt)
            sums["MRR"] += reciprocal_rank(ranked, qt)
            sums[f"P@{pr_cutoff}"] += precision_at(ranked, qt, pr_cutoff)
            sums[f"R@{pr_cutoff}"] += recall_at(ranked, qt, pr_cutoff)
            for c in ap_cutoffs:
                sums[f"MAP@{c}"] += average_precision(ranked, qt, cutoff=c)
            for c in ndcg_cutoffs:
                sums[f"NDCG@{c}"] += ndcg(ranked, qt, cutoff=c)
        report.rows[method] = {c: sums[c] / len(qids) for c in columns}
    return report


def write_run(per_query: dict[str, RankedList], method: str, path: str | Path) -> None:
    """Standard run-file lines: qid Q0 docid rank score tag."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for qid in sorted(per_query):
            for rank, (pid, score) in enumerate(per_query[qid].entries, start=1):
                fh.write(f"{qid} Q0 {pid} {rank} {score:.12g} {method}\n")


def read_run(path: str | Path) -> tuple[str, dict[str, RankedList]]:
    """Read a run file back into per-query ranked lists; returns (tag, runs)."""
    per_query: dict[str, list[tuple[str, float]]] = {}
    tag = "run"
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise DataError(f"{path}: line {lineno}: expected 6 fields")
            qid, _, pid, _, score, tag = parts
            per_query.setdefault(qid, []).append((pid, float(score)))
    return tag, {
        qid: RankedList(query_id=qid, method=tag, entries=entries)
        for qid, entries in per_query.items()
    }


def side_by_side(
    left: RankedList,
    right: RankedList,
    truth: QueryTruth,
    depth: int = 10,
) -> str:
    """Two-method comparison of the top retrieved true citations, with their
    citing counts, one rank per line."""
    def top_hits(ranked: RankedList) -> list[tuple[str, int]]:
        hits = [(pid, truth[pid]) for pid, _ in ranked.entries if pid in truth]
        return hits[:depth]

    lhs, rhs = top_hits(left), top_hits(right)
    lines = [
        f"query {left.query_id}",
        f"{'':>4}  {left.method:<24}{'cites':>6}    {right.method:<24}{'cites':>6}",
    ]
    for i in range(max(len(lhs), len(rhs))):
        lcell = lhs[i] if i < len(lhs) else ("-", "")
        rcell = rhs[i] if i < len(rhs) else ("-", "")
        lines.append(
            f"{i + 1:>4}  {lcell[0]:<24}{str(lcell[1]):>6}    {rcell[0]:<24}{str(rcell[1]):>6}"
        )
    return "\n".join(lines) + "\n"
