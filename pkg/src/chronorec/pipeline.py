"""Workspace pipeline: ingest -> slices -> embed -> profile -> train ->
recommend -> evaluate, plus the synth generator and the two experiment
recipes (neighbor-count sweep, preference-dispersion scatter).

Artifacts are plain files in one workspace directory, every command logs a
config hash and output checksums to ``pipeline.log``, and identical inputs
reproduce identical bytes. No database, no hidden state.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from chronorec import binio, metrics, ranker, timemlp
from chronorec.config import PipelineConfig
from chronorec.corpus import (
    Corpus,
    TimeSliceConfig,
    assign_slices,
    load_corpus,
    save_corpus,
    split_train_test,
    tokenize,
    true_time_preference,
)
from chronorec.embeddings.docvec import DocVectorModel, DocVectorParams, train_content_embeddings
from chronorec.embeddings.nodevec import WalkParams, filter_test_edges, train_node_embeddings
from chronorec.embeddings.table import EmbeddingTable, MaxAbsScaler, fit_max_abs_scaler
from chronorec.errors import DataError
from chronorec.profiles import QueryProfile, build_profile
from chronorec.synth import SynthConfig, generate
from chronorec.timemlp import MlpParams, TrainConfig

log = logging.getLogger(__name__)

CORPUS_FILE = "corpus.jsonl"
SLICES_FILE = "slices.json"
SPLITS_FILE = "splits.json"
CONTENT_MODEL_FILE = "content.model"
CONTENT_TABLE_FILE = "content.emb"
NODE_TABLE_FILE = "node.emb"
PROFILES_FILE = "profiles.bin"
MLP_FILE = "model.bin"
TRACE_FILE = "train_trace.json"
PLANTED_FILE = "planted.jsonl"
REPORT_TXT = "eval_report.txt"
REPORT_KV = "eval_report.kv"
SWEEP_FILE = "sweep.tsv"
DISPERSION_FILE = "dispersion.tsv"
LOG_FILE = "pipeline.log"

_PRODUCER = {
    CORPUS_FILE: "ingest (or synth)",
    SLICES_FILE: "slices (or synth)",
    SPLITS_FILE: "slices",
    CONTENT_MODEL_FILE: "embed",
    CONTENT_TABLE_FILE: "embed",
    NODE_TABLE_FILE: "embed",
    PROFILES_FILE: "profile",
    MLP_FILE: "train",
    TRACE_FILE: "train",
}

_PROFILES_MAGIC = b"CRPRF1\n"


def _require(ws: Path, name: str) -> Path:
    path = ws / name
    if not path.exists():
        producer = _PRODUCER.get(name, "an earlier command")
        raise DataError(f"missing artifact {name!r} in {ws}; run `{producer}` first")
    return path


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _log_event(ws: Path, command: str, config: PipelineConfig, outputs: list[Path]) -> None:
    event = {
        "command": command,
        "seed": config.seed,
        "config_hash": config.config_hash(),
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    with (ws / LOG_FILE).open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(event, sort_keys=True) + "\n")


def _workspace(out: str | Path) -> Path:
    ws = Path(out)
    ws.mkdir(parents=True, exist_ok=True)
    return ws


def _parallel_map(fn, items, workers: int) -> list:
    """Map over queries; executor.map keeps result order, so reductions stay
    deterministic regardless of worker count."""
    if workers <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def load_sliced_corpus(ws: Path) -> Corpus:
    corpus = load_corpus(_require(ws, CORPUS_FILE))
    slice_cfg = TimeSliceConfig.load(_require(ws, SLICES_FILE))
    return assign_slices(corpus, slice_cfg)


def _load_splits(ws: Path) -> tuple[list[str], list[str]]:
    data = json.loads(_require(ws, SPLITS_FILE).read_text())
    return data["train"], data["test"]


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(out: str | Path, config: PipelineConfig) -> dict:
    """Validate a corpus file and write the normalized copy into the workspace."""
    ws = _workspace(out)
    if not config.corpus_path:
        raise DataError("ingest needs corpus_path")
    corpus = load_corpus(config.corpus_path)
    save_corpus(corpus, ws / CORPUS_FILE)
    _log_event(ws, "ingest", config, [ws / CORPUS_FILE])
    return {
        "papers": len(corpus),
        "edges": len(corpus.citation_edges()),
        "dropped_edges": corpus.dropped_edges,
        "corpus": str(ws / CORPUS_FILE),
    }


def _auto_slices(years: list[int], t: int) -> TimeSliceConfig:
    """Contiguous intervals with roughly equal paper counts, first open-below."""
    if t < 2:
        raise DataError("auto slice count must be >= 2")
    counts: dict[int, int] = {}
    for y in years:
        counts[y] = counts.get(y, 0) + 1
    distinct = sorted(counts)
    if len(distinct) < t:
        raise DataError(f"only {len(distinct)} distinct years; cannot make {t} slices")
    total = len(years)
    ends: list[int] = []
    acc = 0
    remaining = t
    for i, year in enumerate(distinct):
        acc += counts[year]
        years_left = len(distinct) - i - 1
        if remaining > 1 and (acc >= total / t * (t - remaining + 1) or years_left < remaining):
            if years_left >= remaining - 1:
                ends.append(year)
                remaining -= 1
    ends.append(distinct[-1])
    intervals: list[tuple[int | None, int]] = []
    prev_end: int | None = None
    for i, end in enumerate(ends):
        start = None if i == 0 else prev_end + 1
        intervals.append((start, end))
        prev_end = end
    return TimeSliceConfig(tuple(intervals))


def cmd_slices(out: str | Path, config: PipelineConfig) -> dict:
    """Assign slices (explicit, reused, or auto-balanced) and split train/test."""
    ws = _workspace(out)
    corpus = load_corpus(_require(ws, CORPUS_FILE))
    if config.slices.intervals is not None:
        slice_cfg = TimeSliceConfig(tuple(config.slices.intervals))
    elif (ws / SLICES_FILE).exists():
        slice_cfg = TimeSliceConfig.load(ws / SLICES_FILE)
    elif config.slices.auto is not None:
        slice_cfg = _auto_slices([p.year for p in corpus.papers.values()], config.slices.auto)
    else:
        raise DataError("slices needs explicit intervals, an existing slices.json, or auto")
    corpus = assign_slices(corpus, slice_cfg)
    train, test = split_train_test(
        corpus,
        config.split.min_refs,
        config.split.min_slices,
        config.split.test_size,
        config.seed,
    )
    slice_cfg.save(ws / SLICES_FILE)
    splits = {
        "min_refs": config.split.min_refs,
        "min_slices": config.split.min_slices,
        "seed": config.seed,
        "train": train,
        "test": test,
    }
    (ws / SPLITS_FILE).write_text(json.dumps(splits, sort_keys=True) + "\n")
    _log_event(ws, "slices", config, [ws / SLICES_FILE, ws / SPLITS_FILE])
    return {
        "slices": slice_cfg.num_slices,
        "slice_counts": corpus.slice_counts(),
        "train": len(train),
        "test": len(test),
    }


def cmd_embed(out: str | Path, config: PipelineConfig) -> dict:
    """Train content and node embeddings; the walk graph drops citing links
    that originate from held-out papers."""
    ws = _workspace(out)
    corpus = load_sliced_corpus(ws)
    _, test_ids = _load_splits(ws)

    doc_params = DocVectorParams(
        dim=config.embed.dim,
        epochs=config.embed.docvec_epochs,
        negatives=config.embed.negatives,
        seed=config.seed,
    )
    content = train_content_embeddings(corpus, config.embed.dim, doc_params)
    content.save(ws / CONTENT_MODEL_FILE)
    content.table.save(ws / CONTENT_TABLE_FILE)

    edges = filter_test_edges(corpus.citation_edges(), set(test_ids))
    walk_params = WalkParams(
        num_walks=config.embed.num_walks,
        walk_length=config.embed.walk_length,
        window=config.embed.window,
        negatives=config.embed.negatives,
        epochs=config.embed.node_epochs,
        seed=config.seed,
    )
    node = train_node_embeddings(
        edges,
        config.embed.dim,
        p=config.embed.node_p,
        q=config.embed.node_q,
        params=walk_params,
        nodes=corpus.ids,
    )
    node.table.save(ws / NODE_TABLE_FILE)
    outputs = [ws / CONTENT_MODEL_FILE, ws / CONTENT_TABLE_FILE, ws / NODE_TABLE_FILE]
    _log_event(ws, "embed", config, outputs)
    return {
        "papers": len(corpus),
        "dim": config.embed.dim,
        "empty_abstracts": len(content.empty_docs),
        "isolated_nodes": len(node.isolated),
        "walk_edges": len(edges),
    }


def _save_profiles(
    ws: Path,
    k: int,
    scalers: tuple[MaxAbsScaler, MaxAbsScaler],
    sections: dict[str, tuple[list[str], np.ndarray, np.ndarray, np.ndarray, np.ndarray]],
) -> None:
    with (ws / PROFILES_FILE).open("wb") as fh:
        fh.write(_PROFILES_MAGIC)
        binio.write_u64(fh, k)
        binio.write_array(fh, scalers[0].scale)
        binio.write_array(fh, scalers[1].scale)
        for name in ("train", "test"):
            ids, xc, xn, truth, slices = sections[name]
            binio.write_u64(fh, len(ids))
            for pid in ids:
                binio.write_str(fh, pid)
            binio.write_array(fh, xc)
            binio.write_array(fh, xn)
            binio.write_array(fh, truth)
            binio.write_array(fh, slices)


def load_profiles(ws: Path) -> dict:
    """Profiles artifact: raw branch features, truth distributions, and the
    fitted per-branch scalers."""
    with _require(ws, PROFILES_FILE).open("rb") as fh:
        binio.expect_magic(fh, _PROFILES_MAGIC, "profiles artifact")
        k = binio.read_u64(fh)
        content_scaler = MaxAbsScaler(scale=binio.read_array(fh))
        node_scaler = MaxAbsScaler(scale=binio.read_array(fh))
        sections = {}
        for name in ("train", "test"):
            count = binio.read_u64(fh)
            ids = [binio.read_str(fh) for _ in range(count)]
            xc = binio.read_array(fh)
            xn = binio.read_array(fh)
            truth = binio.read_array(fh)
            slices = binio.read_array(fh)
            sections[name] = {
                "ids": ids, "x_content": xc, "x_node": xn,
                "truth": truth, "slices": slices,
            }
    return {"k": k, "content_scaler": content_scaler, "node_scaler": node_scaler, **sections}


def cmd_profile(out: str | Path, config: PipelineConfig) -> dict:
    """Build raw branch features for every train/test query and fit the
    max-abs scalers on the training side."""
    ws = _workspace(out)
    corpus = load_sliced_corpus(ws)
    train_ids, test_ids = _load_splits(ws)
    content = DocVectorModel.load(_require(ws, CONTENT_MODEL_FILE))
    content_table = EmbeddingTable.load(_require(ws, CONTENT_TABLE_FILE))
    node_table = EmbeddingTable.load(_require(ws, NODE_TABLE_FILE))
    k = config.profile.k

    search_table = None
    search_scaler = None
    if config.profile.search_on_scaled:
        search_scaler = fit_max_abs_scaler(content_table.matrix(sorted(train_ids)))
        search_table = EmbeddingTable(dim=content_table.dim, space="content")
        for pid, vec in content_table.vectors.items():
            search_table.vectors[pid] = search_scaler.apply(vec)

    def one(qid: str):
        paper = corpus.papers[qid]
        prof = build_profile(
            paper.abstract, paper.year, corpus, content, content_table,
            node_table, k, query_id=qid, seed=config.seed,
            infer_epochs=config.profile.infer_epochs,
            search_table=search_table, search_scaler=search_scaler,
        )
        return prof, true_time_preference(paper, corpus)

    def section(ids: list[str]) -> tuple[list[str], np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        ids = sorted(ids)
        results = _parallel_map(one, ids, config.workers)
        xc = np.stack([prof.x_content for prof, _ in results])
        xn = np.stack([prof.x_node for prof, _ in results])
        truth = np.stack([t for _, t in results])
        slices = np.array([float(prof.query_slice) for prof, _ in results])
        return ids, xc, xn, truth, slices

    train_sec = section(train_ids)
    test_sec = section(test_ids)
    scalers = (fit_max_abs_scaler(train_sec[1]), fit_max_abs_scaler(train_sec[2]))
    _save_profiles(ws, k, scalers, {"train": train_sec, "test": test_sec})
    _log_event(ws, "profile", config, [ws / PROFILES_FILE])
    return {"k": k, "train": len(train_sec[0]), "test": len(test_sec[0])}


def _scaled_dataset(profiles: dict, section: str) -> list[tuple[QueryProfile, np.ndarray]]:
    sec = profiles[section]
    xc = profiles["content_scaler"].apply_matrix(sec["x_content"])
    xn = profiles["node_scaler"].apply_matrix(sec["x_node"])
    return [
        (
            QueryProfile(
                x_content=xc[i],
                x_node=xn[i],
                query_slice=int(sec["slices"][i]),
            ),
            sec["truth"][i],
        )
        for i in range(len(sec["ids"]))
    ]


def cmd_train(out: str | Path, config: PipelineConfig) -> dict:
    """Train the citing-time MLP on the training profiles."""
    ws = _workspace(out)
    profiles = load_profiles(ws)
    dataset = _scaled_dataset(profiles, "train")
    train_cfg = TrainConfig(
        learning_rate=config.train.learning_rate,
        beta1=config.train.beta1,
        beta2=config.train.beta2,
        eps=config.train.eps,
        epochs=config.train.epochs,
        batch_size=config.train.batch_size,
        seed=config.seed,
    )
    result = timemlp.train(dataset, train_cfg)
    result.params.save(ws / MLP_FILE)
    (ws / TRACE_FILE).write_text(
        json.dumps({"epoch_losses": result.epoch_losses}, sort_keys=True) + "\n"
    )
    _log_event(ws, "train", config, [ws / MLP_FILE, ws / TRACE_FILE])
    return {
        "examples": len(dataset),
        "epochs": config.train.epochs,
        "first_epoch_loss": result.epoch_losses[0],
        "final_epoch_loss": result.epoch_losses[-1],
    }


def _rank_context_base(corpus: Corpus) -> ranker.RankContext:
    return ranker.RankContext(
        slice_of=corpus.slice_of,
        years={pid: p.year for pid, p in corpus.papers.items()},
    )


def _scheme_for(method: str, config: PipelineConfig) -> ranker.WeightScheme:
    kind = "none" if method == "cbf" else method
    return ranker.WeightScheme(
        kind=kind,
        sigma=config.rank.sigma,
        tau_d=config.rank.tau_d,
        w1=config.rank.w1,
        w2=config.rank.w2,
        raw_preference=config.rank.raw_preference,
    )


def _predictions(
    profiles: dict, params: MlpParams, section: str = "test"
) -> dict[str, np.ndarray]:
    preds: dict[str, np.ndarray] = {}
    for (prof, _), qid in zip(
        _scaled_dataset(profiles, section), profiles[section]["ids"]
    ):
        preds[qid] = timemlp.forward(params, prof)
    return preds


def cmd_recommend(out: str | Path, config: PipelineConfig) -> dict:
    """Rank candidates for every test query under each configured method and
    write one run file per method."""
    ws = _workspace(out)
    corpus = load_sliced_corpus(ws)
    _, test_ids = _load_splits(ws)
    content_table = EmbeddingTable.load(_require(ws, CONTENT_TABLE_FILE))
    node_table = EmbeddingTable.load(_require(ws, NODE_TABLE_FILE))
    profiles = load_profiles(ws)
    methods = config.rank.methods

    needs_mlp = any(m == "time_preference" for m in methods)
    params = MlpParams.load(_require(ws, MLP_FILE)) if needs_mlp else None
    preds = _predictions(profiles, params) if params is not None else {}

    pagerank = None
    if "citerank" in methods:
        edges = filter_test_edges(corpus.citation_edges(), set(test_ids))
        pagerank = ranker.citerank_weights(edges, nodes=corpus.ids)

    test_index = {qid: i for i, qid in enumerate(profiles["test"]["ids"])}
    years = {pid: p.year for pid, p in corpus.papers.items()}

    def one(qid: str) -> dict[str, metrics.RankedList]:
        paper = corpus.papers[qid]
        pool = ranker.candidate_pool(qid, paper.year, corpus, config.rank.pool)
        base = ranker.cbf_scores(content_table[qid], pool, content_table, query_id=qid)
        ctx = ranker.RankContext(
            query_year=paper.year,
            slice_of=corpus.slice_of,
            years=years,
            pagerank=pagerank,
            node_table=node_table,
        )
        if qid in preds:
            ctx.preference = preds[qid]
        if qid in test_index:
            ctx.query_node_vec = profiles["test"]["x_node"][test_index[qid]]
        out: dict[str, metrics.RankedList] = {}
        for method in methods:
            weighted = ranker.apply_weight_scheme(base, _scheme_for(method, config), ctx)
            out[method] = metrics.RankedList(
                query_id=qid,
                method=method,
                entries=weighted.entries[: config.rank.top_n],
            )
        return out

    qids = sorted(test_ids)
    per_query_runs = _parallel_map(one, qids, config.workers)
    runs: dict[str, dict[str, metrics.RankedList]] = {m: {} for m in methods}
    for qid, ranked in zip(qids, per_query_runs):
        for method in methods:
            runs[method][qid] = ranked[method]

    runs_dir = ws / "runs"
    runs_dir.mkdir(exist_ok=True)
    outputs = []
    for method in methods:
        run_path = runs_dir / f"run_{method}.txt"
        metrics.write_run(runs[method], method, run_path)
        outputs.append(run_path)
        if config.rank.details:
            detail_path = runs_dir / f"detail_{method}.txt"
            _write_details(detail_path, runs[method], corpus)
            outputs.append(detail_path)
    _log_event(ws, "recommend", config, outputs)
    return {
        "queries": len(test_ids),
        "methods": methods,
        "top_n": config.rank.top_n,
        "runs": [str(p) for p in outputs],
    }


def _write_details(path: Path, per_query: dict[str, metrics.RankedList], corpus: Corpus) -> None:
    """rank, id, score, slice, and citing count when the query cites the id."""
    with path.open("w", encoding="utf-8") as fh:
        for qid in sorted(per_query):
            counts = {cited: c for cited, c in corpus.papers[qid].references}
            for rank, (pid, score) in enumerate(per_query[qid].entries, start=1):
                cited = counts.get(pid, "")
                fh.write(
                    f"{qid}\t{rank}\t{pid}\t{score:.12g}\t{corpus.slice_of[pid]}\t{cited}\n"
                )


def _ground_truth(corpus: Corpus, test_ids: list[str]) -> metrics.GroundTruth:
    truth: metrics.GroundTruth = {}
    for qid in test_ids:
        refs = corpus.papers[qid].references
        if refs:
            truth[qid] = {cited: count for cited, count in refs}
    return truth


def cmd_evaluate(out: str | Path, config: PipelineConfig) -> dict:
    """Score every run file against the reference-list truth and render the
    metric table; optionally print a two-method side-by-side comparison."""
    ws = _workspace(out)
    corpus = load_sliced_corpus(ws)
    _, test_ids = _load_splits(ws)
    truth = _ground_truth(corpus, test_ids)

    runs: dict[str, dict[str, metrics.RankedList]] = {}
    for method in config.rank.methods:
        path = ws / "runs" / f"run_{method}.txt"
        if not path.exists():
            raise DataError(f"missing run file {path}; run `recommend` first")
        tag, per_query = metrics.read_run(path)
        runs[tag] = per_query

    report = metrics.evaluate(
        runs,
        truth,
        ap_cutoffs=tuple(config.eval.cutoffs),
        ndcg_cutoffs=tuple(config.eval.cutoffs),
        pr_cutoff=config.eval.pr_cutoff,
    )
    (ws / REPORT_TXT).write_text(report.render_table())
    (ws / REPORT_KV).write_text(report.render_kv())

    compare_text = None
    if config.eval.compare_query is not None:
        left_m, right_m = config.eval.compare_methods
        compare_text = metrics.side_by_side(
            runs[left_m][config.eval.compare_query],
            runs[right_m][config.eval.compare_query],
            truth[config.eval.compare_query],
        )
    _log_event(ws, "evaluate", config, [ws / REPORT_TXT, ws / REPORT_KV])
    return {
        "num_queries": report.num_queries,
        "columns": report.columns,
        "rows": report.rows,
        "table": report.render_table(),
        "compare": compare_text,
    }


def cmd_synth(out: str | Path, config: PipelineConfig) -> dict:
    """Generate a synthetic corpus with planted drift into the workspace."""
    ws = _workspace(out)
    synth_cfg = SynthConfig(seed=config.seed, **config.synth.model_dump())
    result = generate(synth_cfg)
    save_corpus(result.corpus, ws / CORPUS_FILE)
    result.slice_config.save(ws / SLICES_FILE)
    with (ws / PLANTED_FILE).open("w", encoding="utf-8") as fh:
        for pid in result.corpus.papers:
            paper = result.corpus.papers[pid]
            if not paper.references:
                continue
            pref = true_time_preference(paper, result.corpus)
            fh.write(
                json.dumps(
                    {
                        "id": pid,
                        "topic": result.topic_of[pid],
                        "preference": [round(float(x), 12) for x in pref],
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    outputs = [ws / CORPUS_FILE, ws / SLICES_FILE, ws / PLANTED_FILE]
    _log_event(ws, "synth", config, outputs)
    return {
        "papers": len(result.corpus),
        "slices": result.slice_config.num_slices,
        "topics": synth_cfg.topics,
        "corpus": str(ws / CORPUS_FILE),
    }


def _test_cross_entropy(profiles: dict, params: MlpParams) -> float:
    sec = profiles["test"]
    preds = _predictions(profiles, params)
    losses = [
        timemlp.loss(sec["truth"][i], preds[qid]) for i, qid in enumerate(sec["ids"])
    ]
    return float(np.mean(losses))


def cmd_sweep_k(out: str | Path, config: PipelineConfig, k_values: list[int]) -> dict:
    """Rebuild profiles, retrain, and evaluate for each neighbor count."""
    if not k_values:
        raise DataError("sweep-k needs at least one k value")
    ws = _workspace(out)
    rows = []
    for k in k_values:
        sub = config.model_copy(deep=True)
        sub.profile.k = k
        cmd_profile(ws, sub)
        cmd_train(ws, sub)
        profiles = load_profiles(ws)
        params = MlpParams.load(ws / MLP_FILE)
        mean_ce = _test_cross_entropy(profiles, params)
        sub.rank.methods = ["time_preference"]
        cmd_recommend(ws, sub)
        corpus = load_sliced_corpus(ws)
        _, test_ids = _load_splits(ws)
        truth = _ground_truth(corpus, test_ids)
        _, per_query = metrics.read_run(ws / "runs" / "run_time_preference.txt")
        mrr = float(
            np.mean([metrics.reciprocal_rank(per_query[q], truth[q]) for q in sorted(truth)])
        )
        rows.append({"k": k, "mean_cross_entropy": mean_ce, "mrr": mrr})
    with (ws / SWEEP_FILE).open("w", encoding="utf-8") as fh:
        fh.write("k\tmean_cross_entropy\tmrr\n")
        for row in rows:
            fh.write(f"{row['k']}\t{row['mean_cross_entropy']:.10f}\t{row['mrr']:.10f}\n")
    _log_event(ws, "sweep-k", config, [ws / SWEEP_FILE])
    return {"rows": rows, "table": str(ws / SWEEP_FILE)}


def cmd_dispersion(out: str | Path, config: PipelineConfig) -> dict:
    """Per test query: spread of the true citing-time distribution vs the
    prediction's cross-entropy, plus the correlation sign."""
    ws = _workspace(out)
    profiles = load_profiles(ws)
    params = MlpParams.load(_require(ws, MLP_FILE))
    sec = profiles["test"]
    preds = _predictions(profiles, params)
    pairs = []
    for i, qid in enumerate(sec["ids"]):
        truth = sec["truth"][i]
        pairs.append(
            {
                "id": qid,
                "stddev": float(np.std(truth)),
                "cross_entropy": timemlp.loss(truth, preds[qid]),
            }
        )
    with (ws / DISPERSION_FILE).open("w", encoding="utf-8") as fh:
        fh.write("id\tstddev\tcross_entropy\n")
        for row in pairs:
            fh.write(f"{row['id']}\t{row['stddev']:.10f}\t{row['cross_entropy']:.10f}\n")
    stds = np.array([r["stddev"] for r in pairs])
    ces = np.array([r["cross_entropy"] for r in pairs])
    if len(pairs) > 1 and stds.std() > 0 and ces.std() > 0:
        corr = float(np.corrcoef(stds, ces)[0, 1])
    else:
        corr = 0.0
    _log_event(ws, "dispersion", config, [ws / DISPERSION_FILE])
    return {
        "pairs": len(pairs),
        "correlation": corr,
        "correlation_sign": "negative" if corr < 0 else "non-negative",
        "table": str(ws / DISPERSION_FILE),
    }


def recommend_query(
    out: str | Path,
    abstract: str,
    year: int,
    config: PipelineConfig,
    method: str = "time_preference",
) -> dict:
    """Ad-hoc ranking for a free-text query against a prepared workspace."""
    ws = _workspace(out)
    corpus = load_sliced_corpus(ws)
    content = DocVectorModel.load(_require(ws, CONTENT_MODEL_FILE))
    content_table = EmbeddingTable.load(_require(ws, CONTENT_TABLE_FILE))
    node_table = EmbeddingTable.load(_require(ws, NODE_TABLE_FILE))
    profiles = load_profiles(ws)

    tokens = tokenize(abstract)
    raw = build_profile(
        tokens, year, corpus, content, content_table, node_table,
        profiles["k"], seed=config.seed, infer_epochs=config.profile.infer_epochs,
    )
    scaled = QueryProfile(
        x_content=profiles["content_scaler"].apply(raw.x_content),
        x_node=profiles["node_scaler"].apply(raw.x_node),
        query_slice=raw.query_slice,
        neighbor_ids=raw.neighbor_ids,
    )
    ctx = _rank_context_base(corpus)
    ctx.query_year = year
    ctx.node_table = node_table
    ctx.query_node_vec = raw.x_node
    preference = None
    if method == "time_preference":
        params = MlpParams.load(_require(ws, MLP_FILE))
        preference = timemlp.forward(params, scaled)
        ctx.preference = preference
    ranked = ranker.recommend(
        "query", raw.x_content, year, corpus, content_table,
        _scheme_for(method, config), ctx,
        top_n=config.rank.top_n, pool_policy=config.rank.pool,
    )
    return {
        "method": ranked.method,
        "query_slice": raw.query_slice,
        "neighbors": raw.neighbor_ids[:10],
        "preference": None if preference is None else [float(x) for x in preference],
        "entries": [
            {"id": pid, "score": score, "slice": corpus.slice_of[pid]}
            for pid, score in ranked.entries
        ],
    }
