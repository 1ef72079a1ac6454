"""Corpus loading, time-slice assignment, train/test filtering, and the
ground-truth citing-time distribution.

A corpus file is line-delimited JSON, one record per line:
``{"id": str, "year": int, "abstract": str, "references": [{"id": str, "count": int}]}``
(see ``schemas/corpus_record.schema.json``). References to ids absent from
the file are dropped and counted, not treated as errors: real exports are
routinely incomplete and the loader has to tolerate that.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from chronorec.errors import DataError

YEAR_MIN = 1000
YEAR_MAX = 3000

_TOKEN_RE = re.compile(r"[0-9a-z]+")


def tokenize(text: str) -> tuple[str, ...]:
    """Lowercase, split on non-alphanumeric runs, drop tokens shorter than 2."""
    return tuple(t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= 2)


@dataclass(frozen=True)
class Paper:
    """One bibliographic record; references carry per-relation citing counts."""

    id: str
    year: int
    abstract: tuple[str, ...]
    references: tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class TimeSliceConfig:
    """Ordered, contiguous, inclusive year intervals; the first may be
    open-below (start=None, e.g. "pre-1995")."""

    intervals: tuple[tuple[int | None, int], ...]

    def __post_init__(self) -> None:
        if len(self.intervals) < 2:
            raise DataError("slice config needs at least 2 intervals")
        prev_end: int | None = None
        for i, (start, end) in enumerate(self.intervals):
            if start is None and i != 0:
                raise DataError("only the first interval may be open-below")
            if start is not None and start > end:
                raise DataError(f"interval {i} has start {start} > end {end}")
            if prev_end is not None:
                if start is None or start != prev_end + 1:
                    raise DataError(
                        f"interval {i} starts at {start}, expected {prev_end + 1}"
                    )
            prev_end = end

    @property
    def num_slices(self) -> int:
        return len(self.intervals)

    def slice_of_year(self, year: int) -> int:
        for i, (start, end) in enumerate(self.intervals):
            if (start is None or year >= start) and year <= end:
                return i
        raise DataError(f"year {year} not covered by slice config")

    def label(self, index: int) -> str:
        # the open-below slice is labeled by its inclusive end ("pre-1995"
        # holding years up to and including 1995, next slice starting 1996)
        start, end = self.intervals[index]
        if start is None:
            return f"pre-{end}"
        return f"{start}-{end}" if start != end else str(start)

    def years_of_slice(self, index: int) -> tuple[int, int]:
        """(first, last) year of a slice; an open-below start maps to YEAR_MIN."""
        start, end = self.intervals[index]
        return (YEAR_MIN if start is None else start, end)

    def to_json(self) -> list[dict]:
        return [{"start": s, "end": e} for s, e in self.intervals]

    @classmethod
    def from_json(cls, data: list[dict]) -> "TimeSliceConfig":
        try:
            intervals = tuple((item["start"], int(item["end"])) for item in data)
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed slice config: {exc}") from exc
        intervals = tuple(
            (None if s is None else int(s), e) for s, e in intervals
        )
        return cls(intervals)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "TimeSliceConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


# Slice layouts used for the two corpora studied by this model family.
PUBMED_SLICES = TimeSliceConfig(
    (
        (None, 1995),
        (1996, 2000),
        (2001, 2003),
        (2004, 2005),
        (2006, 2007),
        (2008, 2009),
        (2010, 2013),
    )
)
DBLP_SLICES = TimeSliceConfig(
    (
        (None, 1995),
        (1996, 2000),
        (2001, 2003),
        (2004, 2005),
        (2006, 2007),
        (2008, 2009),
        (2010, 2011),
        (2012, 2013),
    )
)


@dataclass(frozen=True)
class Corpus:
    """Immutable id-indexed paper collection plus its citation graph.

    ``slice_of`` is empty until :func:`assign_slices` has run.
    """

    papers: dict[str, Paper]
    dropped_edges: int = 0
    config: TimeSliceConfig | None = None
    slice_of: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.papers)

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self.papers

    @property
    def ids(self) -> list[str]:
        return list(self.papers)

    def citation_edges(self) -> list[tuple[str, str]]:
        """Directed (citing, cited) pairs, file order; endpoints all in-corpus."""
        return [
            (p.id, cited) for p in self.papers.values() for cited, _ in p.references
        ]

    @property
    def num_slices(self) -> int:
        if self.config is None:
            raise DataError("slices not assigned; run assign_slices first")
        return self.config.num_slices

    def slice_counts(self) -> list[int]:
        counts = [0] * self.num_slices
        for s in self.slice_of.values():
            counts[s] += 1
        return counts

    def papers_in_slice(self, index: int) -> list[str]:
        return [pid for pid, s in self.slice_of.items() if s == index]


def _parse_record(obj: dict, lineno: int) -> Paper:
    try:
        pid = obj["id"]
        year = obj["year"]
        abstract = obj["abstract"]
        refs = obj["references"]
    except (KeyError, TypeError) as exc:
        raise DataError(f"line {lineno}: missing field {exc}") from exc
    if not isinstance(pid, str) or not pid:
        raise DataError(f"line {lineno}: id must be a non-empty string")
    if not isinstance(year, int) or not (YEAR_MIN <= year <= YEAR_MAX):
        raise DataError(
            f"line {lineno}: year {year!r} outside representable range "
            f"[{YEAR_MIN}, {YEAR_MAX}]"
        )
    seen: set[str] = set()
    parsed_refs = []
    for ref in refs:
        try:
            cited, count = ref["id"], int(ref["count"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"line {lineno}: malformed reference entry: {exc}") from exc
        if cited in seen:
            raise DataError(
                f"line {lineno}: duplicate cited id {cited!r} in reference list of {pid!r}"
            )
        if count < 1:
            raise DataError(f"line {lineno}: citing count {count} < 1 for {cited!r}")
        seen.add(cited)
        parsed_refs.append((cited, count))
    return Paper(
        id=pid, year=year, abstract=tokenize(abstract), references=tuple(parsed_refs)
    )


def load_corpus(path: str | Path) -> Corpus:
    """Parse a line-delimited corpus file; slice assignment is deferred.

    References whose cited id is absent from the file are dropped and tallied
    in ``Corpus.dropped_edges``.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"corpus file not found: {path}")
    records: dict[str, Paper] = {}
    order: list[Paper] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: invalid JSON: {exc}") from exc
            paper = _parse_record(obj, lineno)
            if paper.id in records:
                raise DataError(f"line {lineno}: duplicate paper id {paper.id!r}")
            records[paper.id] = paper
            order.append(paper)

    dropped = 0
    papers: dict[str, Paper] = {}
    for paper in order:
        kept = tuple(ref for ref in paper.references if ref[0] in records)
        dropped += len(paper.references) - len(kept)
        papers[paper.id] = (
            paper if len(kept) == len(paper.references) else replace(paper, references=kept)
        )
    return Corpus(papers=papers, dropped_edges=dropped)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write the line-delimited format back out (tokenized abstracts rejoin
    with single spaces, so save/load round-trips are stable after the first
    normalization)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for paper in corpus.papers.values():
            obj = {
                "id": paper.id,
                "year": paper.year,
                "abstract": " ".join(paper.abstract),
                "references": [{"id": cited, "count": c} for cited, c in paper.references],
            }
            fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=False) + "\n")


def assign_slices(corpus: Corpus, config: TimeSliceConfig) -> Corpus:
    """Return a corpus with every paper placed in its year's slice."""
    slice_of = {pid: config.slice_of_year(p.year) for pid, p in corpus.papers.items()}
    return replace(corpus, config=config, slice_of=slice_of)


def eligible_ids(corpus: Corpus, min_refs: int, min_slices: int) -> list[str]:
    """Papers with strictly more than ``min_refs`` in-corpus references that
    span strictly more than ``min_slices`` distinct slices."""
    if not corpus.slice_of:
        raise DataError("slices not assigned; run assign_slices first")
    out = []
    for pid, paper in corpus.papers.items():
        if len(paper.references) <= min_refs:
            continue
        slices = {corpus.slice_of[cited] for cited, _ in paper.references}
        if len(slices) > min_slices:
            out.append(pid)
    return out


def split_train_test(
    corpus: Corpus,
    min_refs: int,
    min_slices: int,
    test_size: int,
    seed: int,
) -> tuple[list[str], list[str]]:
    """Randomly partition the eligible papers into train/test by seed.

    Returned lists are sorted; the partition itself is the random part.
    """
    if min_refs < 1 or min_slices < 1:
        raise DataError("eligibility thresholds must be >= 1")
    eligible = sorted(eligible_ids(corpus, min_refs, min_slices))
    if test_size > len(eligible):
        raise DataError(
            f"test_size {test_size} exceeds eligible count {len(eligible)}"
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(eligible))
    test = sorted(eligible[i] for i in perm[:test_size])
    train = sorted(eligible[i] for i in perm[test_size:])
    return train, test


def true_time_preference(paper: Paper, corpus: Corpus) -> np.ndarray:
    """Per-slice distribution of the paper's cited papers.

    Each distinct cited paper counts once regardless of how many times the
    citing paper cites it; the counts are normalized to sum to 1.
    """
    if not corpus.slice_of:
        raise DataError("slices not assigned; run assign_slices first")
    counts = np.zeros(corpus.num_slices, dtype=np.float64)
    for cited, _ in paper.references:
        if cited in corpus.slice_of:
            counts[corpus.slice_of[cited]] += 1.0
    total = counts.sum()
    if total == 0:
        raise DataError(f"paper {paper.id!r} has no resolvable references")
    return counts / total


def is_valid_preference(probs: np.ndarray, tol: float = 1e-9) -> bool:
    probs = np.asarray(probs, dtype=np.float64)
    return bool(np.all(probs >= 0.0) and abs(probs.sum() - 1.0) < tol)
