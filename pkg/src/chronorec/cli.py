"""Command-line client for the pipeline service.

Every subcommand serializes its arguments into an API request. Without
--url the app is mounted in-process (no server needed); with --url the same
requests go to a running `chronorec serve` instance.

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx

from chronorec.config import PipelineConfig, load_config


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse default exits 2; spec says 1
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _csv(text: str) -> list[str]:
    return [part for part in text.split(",") if part]


def _csv_int(text: str) -> list[int]:
    return [int(part) for part in _csv(text)]


def build_parser() -> _Parser:
    parser = _Parser(prog="chronorec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--out", required=(name != "serve"), help="workspace directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None, help="JSON or YAML pipeline config")
        p.add_argument("--url", default=None, help="base URL of a running service")
        p.add_argument("--workers", type=int, default=None, help="per-query fan-out")
        return p

    p = add("ingest", "validate a corpus file into the workspace")
    p.add_argument("--corpus", default=None, help="input corpus file (JSONL)")

    p = add("slices", "assign time slices and split train/test")
    p.add_argument("--auto", type=int, default=None, help="auto-balance into N slices")
    p.add_argument("--intervals", default=None, help='JSON [{"start":..,"end":..},..]')
    p.add_argument("--min-refs", type=int, default=None)
    p.add_argument("--min-slices", type=int, default=None)
    p.add_argument("--test-size", type=int, default=None)

    p = add("embed", "train content and node embeddings")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--num-walks", type=int, default=None)
    p.add_argument("--walk-length", type=int, default=None)
    p.add_argument("--docvec-epochs", type=int, default=None)
    p.add_argument("--node-epochs", type=int, default=None)

    p = add("profile", "build query profiles and fit scalers")
    p.add_argument("--k", type=int, default=None, help="same-slice neighbor count")

    p = add("train", "train the citing-time MLP")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)

    p = add("recommend", "rank candidates for every test query")
    p.add_argument("--methods", type=_csv, default=None, help="comma-separated methods")
    p.add_argument("--top-n", type=int, default=None)
    p.add_argument("--pool", default=None, choices=["all", "on_or_before"])
    p.add_argument("--details", action="store_true", help="also write detailed lists")

    p = add("evaluate", "score run files and render the metric table")
    p.add_argument("--methods", type=_csv, default=None)
    p.add_argument("--compare-query", default=None, help="side-by-side for one query")
    p.add_argument("--compare-methods", type=_csv, default=None, help="two method names")

    p = add("synth", "generate a synthetic corpus with planted drift")
    p.add_argument("--topics", type=int, default=None)
    p.add_argument("--t-slices", type=int, default=None)
    p.add_argument("--papers-per-slice", type=int, default=None)
    p.add_argument("--drift-rate", type=float, default=None)
    p.add_argument("--citation-budget", type=int, default=None)

    p = add("sweep-k", "profile/train/evaluate across neighbor counts")
    p.add_argument("--k-values", type=_csv_int, required=True, help="e.g. 10,15,20,50,100")

    add("dispersion", "true-preference spread vs prediction cross-entropy")

    p = add("query", "rank candidates for a free-text query")
    p.add_argument("--abstract", required=True)
    p.add_argument("--year", type=int, required=True)
    p.add_argument("--method", default="time_preference")
    p.add_argument("--top", type=int, default=10, help="entries to print")

    p = add("serve", "run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8230)

    return parser


def _merge_config(args: argparse.Namespace) -> PipelineConfig:
    config = load_config(args.config) if args.config else PipelineConfig()
    data = config.model_dump()
    if args.seed is not None:
        data["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        data["workers"] = args.workers

    def put(section: str, key: str, value) -> None:
        if value is not None:
            data[section][key] = value

    cmd = args.command
    if cmd == "ingest" and args.corpus is not None:
        data["corpus_path"] = args.corpus
    if cmd == "slices":
        put("slices", "auto", args.auto)
        if args.intervals is not None:
            data["slices"]["intervals"] = [
                (item["start"], item["end"]) for item in json.loads(args.intervals)
            ]
        put("split", "min_refs", args.min_refs)
        put("split", "min_slices", args.min_slices)
        put("split", "test_size", args.test_size)
    if cmd == "embed":
        put("embed", "dim", args.dim)
        put("embed", "num_walks", args.num_walks)
        put("embed", "walk_length", args.walk_length)
        put("embed", "docvec_epochs", args.docvec_epochs)
        put("embed", "node_epochs", args.node_epochs)
    if cmd == "profile":
        put("profile", "k", args.k)
    if cmd == "train":
        put("train", "epochs", args.epochs)
        put("train", "batch_size", args.batch_size)
        put("train", "learning_rate", args.lr)
    if cmd == "recommend":
        put("rank", "methods", args.methods)
        put("rank", "top_n", args.top_n)
        put("rank", "pool", args.pool)
        if args.details:
            data["rank"]["details"] = True
    if cmd == "evaluate":
        put("rank", "methods", args.methods)
        put("eval", "compare_query", args.compare_query)
        if args.compare_methods is not None:
            if len(args.compare_methods) != 2:
                raise ValueError("--compare-methods takes exactly two names")
            data["eval"]["compare_methods"] = args.compare_methods
    if cmd == "synth":
        put("synth", "topics", args.topics)
        put("synth", "slices", args.t_slices)
        put("synth", "papers_per_slice", args.papers_per_slice)
        put("synth", "drift_rate", args.drift_rate)
        put("synth", "citation_budget", args.citation_budget)
    return PipelineConfig.model_validate(data)


def _usage(message: str) -> int:
    print(f"chronorec: error: {message}", file=sys.stderr)
    return 1


def make_client(url: str | None) -> httpx.Client:
    if url:
        return httpx.Client(base_url=url, timeout=None)
    # in-process transport against the app itself; no server required
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from chronorec.service.app import create_app

    return TestClient(create_app())


def _print_result(command: str, body: dict) -> None:
    result = body.get("result", body)
    if command == "evaluate" and isinstance(result, dict) and result.get("table"):
        print(result["table"], end="")
        if result.get("compare"):
            print()
            print(result["compare"], end="")
        return
    if command == "sweep-k" and isinstance(result, dict) and "rows" in result:
        print("k\tmean_cross_entropy\tmrr")
        for row in result["rows"]:
            print(f"{row['k']}\t{row['mean_cross_entropy']:.6f}\t{row['mrr']:.6f}")
        return
    print(json.dumps(result, indent=2, sort_keys=True))


def _print_query(body: dict, top: int) -> None:
    print(f"slice={body['query_slice']} method={body['method']}")
    if body.get("preference") is not None:
        pref = " ".join(f"{x:.3f}" for x in body["preference"])
        print(f"predicted preference: [{pref}]")
    for rank, entry in enumerate(body["entries"][:top], start=1):
        print(f"{rank:>4}  {entry['id']:<24}{entry['score']:< .6f}  slice {entry['slice']}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from chronorec.service.app import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    try:
        config = _merge_config(args)
    except SystemExit:
        raise
    except Exception as exc:  # bad config file or flag values are usage errors
        return _usage(str(exc))

    payload: dict = {"workspace": args.out, "config": config.model_dump(mode="json")}
    if args.command == "sweep-k":
        payload["k_values"] = args.k_values
    if args.command == "query":
        payload = {
            "workspace": args.out,
            "abstract": args.abstract,
            "year": args.year,
            "method": args.method,
            "config": config.model_dump(mode="json"),
        }

    with make_client(args.url) as client:
        try:
            resp = client.post(f"/{args.command}", json=payload)
        except httpx.HTTPError as exc:
            return _usage(f"cannot reach service: {exc}")

    if resp.status_code == 200:
        body = resp.json()
        if args.command == "query":
            _print_query(body, args.top)
        else:
            print(f"[{args.command}] config={body.get('config_hash', '')}")
            _print_result(args.command, body)
        return 0

    try:
        body = resp.json()
    except ValueError:
        body = {}
    kind = body.get("kind")
    message = body.get("message") or body.get("detail") or resp.text
    print(f"chronorec: {kind or 'error'}: {message}", file=sys.stderr)
    if kind == "data":
        return 2
    if kind == "numerical":
        return 3
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
