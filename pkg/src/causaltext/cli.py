"""Command-line entry point binding generation, evaluation and analysis.

Exit codes: 0 ok, 1 usage, 2 data error, 3 scorer error. Every command
honors --seed, writes outputs atomically, and embeds a provenance block
(version, args, input hashes).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from urllib.parse import parse_qsl, urlsplit

import numpy as np

from causaltext.common import (
    DataError,
    ScorerError,
    UsageError,
    atomic_write_text,
    canonical_json,
    provenance,
    sha256_file,
)
from causaltext import corpus as corpus_mod
from causaltext import dataset as dataset_mod
from causaltext import evaluate as eval_mod
from causaltext import graphs as graphs_mod
from causaltext.oracles import OracleParams, build_oracle
from causaltext.scoring import FileScorer, HttpScorer, Scorer, ScoreQuery, write_query_file
from causaltext.templates import load_inventory


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="causaltext", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-graph", help="generate a causal graph + relation graph")
    g.add_argument("--n", type=int, default=graphs_mod.DEFAULT_NUM_EVENTS)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    d = sub.add_parser("gen-data", help="build a dataset from a graph file")
    d.add_argument("--graph", required=True)
    d.add_argument("--config", help="dataset config JSON (may name a preset)")
    d.add_argument("--preset", help="config preset name")
    d.add_argument("--seed", type=int, help="override the config seed")
    d.add_argument("--num-scenarios", type=int, help="override scenario count")
    d.add_argument("--train-size", type=int, help="override train split size")
    d.add_argument("--out-dir", required=True)
    d.add_argument("--workers", type=int, help="default $CAUSALTEXT_WORKERS or 1")

    e = sub.add_parser("eval", help="evaluate a scorer on causal-relation tasks")
    e.add_argument("--graph", required=True)
    e.add_argument("--manifest", help="dataset manifest (training statistics)")
    e.add_argument("--scorer", help="oracle:NAME[?k=v] | file:PATH | http:URL")
    e.add_argument(
        "--task",
        required=True,
        choices=list(eval_mod.TASK_NAMES) + ["position", "post_hoc", "frequency", "seen_unseen"],
    )
    e.add_argument("--over", choices=["causal", "unrelated"], help="test set for tasks that allow both")
    e.add_argument("--position", default="random", choices=["random", "xy", "yx"])
    e.add_argument("--trained-majority", default="xy", choices=["xy", "yx"])
    e.add_argument("--probe", action="store_true", help="verbalize causal options with unrelated-relation templates")
    e.add_argument("--buckets", type=int, default=10)
    e.add_argument("--tie", default="fixed", choices=["fixed", "random", "split"])
    e.add_argument("--tie-seed", type=int, default=0)
    e.add_argument("--covered-only", action="store_true", help="restrict to pairs mentioned in the training data")
    e.add_argument("--inventory", default="canonical")
    e.add_argument("--report-json")
    e.add_argument("--report-md")
    e.add_argument("--emit-queries", help="write the score-request JSONL and exit")

    c = sub.add_parser("analyze-corpus", help="mention-order statistics over a corpus")
    c.add_argument("--input", required=True, help="corpus file or directory")
    c.add_argument("--pairs", help="CSV of cause,effect (default: built-in list)")
    c.add_argument("--window", type=int, default=corpus_mod.DEFAULT_WINDOW)
    c.add_argument("--min-cooccur", type=int, default=corpus_mod.DEFAULT_MIN_COOCCURRENCE)
    c.add_argument("--format", default="jsonl", choices=["jsonl", "txt"])
    c.add_argument("--word-boundary", action="store_true")
    c.add_argument("--workers", type=int)
    c.add_argument("--out-csv")
    c.add_argument("--out-json")
    return p


def _hash_if_exists(path: str | None) -> dict[str, str]:
    if path and Path(path).is_file():
        return {Path(path).name: sha256_file(path)}
    return {}


def cmd_gen_graph(args) -> int:
    if args.n < 2:
        raise UsageError(f"--n must be at least 2, got {args.n}")
    if args.seed < 0:
        raise UsageError("--seed must be non-negative")
    rng = np.random.default_rng(args.seed)
    gc = graphs_mod.gen_causal_graph(args.n, rng, seed=args.seed)
    gn = graphs_mod.gen_relation_graph(gc, rng)
    problems = graphs_mod.check_graph_invariants(gc, gn)
    if problems:
        raise DataError(f"generated graph failed self-check: {problems[:3]}")
    meta = provenance("gen-graph", {"n": args.n, "seed": args.seed})
    graphs_mod.save_graphs(args.out, gc, gn, meta=meta)
    print(f"wrote {args.out}: n={gc.n} roots={len(gc.roots)} edges={len(gc.edges)} types={len(gn.types)}")
    return 0


def cmd_gen_data(args) -> int:
    gc, gn = graphs_mod.load_graphs(args.graph)
    raw: dict = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config {args.config}: {exc}") from exc
    if args.preset:
        raw.setdefault("preset", args.preset)
    for key, val in (
        ("seed", args.seed),
        ("num_scenarios", args.num_scenarios),
        ("train_size", args.train_size),
    ):
        if val is not None:
            raw[key] = val
    cfg = dataset_mod.DatasetConfig.from_json_dict(raw)
    ds = dataset_mod.build_dataset(gc, gn, cfg, workers=args.workers)
    # provenance records what determines the bytes; worker count does not
    meta = provenance(
        "gen-data",
        {"graph": args.graph, "config": cfg.to_json_dict()},
        _hash_if_exists(args.graph),
    )
    paths = dataset_mod.write_dataset(ds, args.out_dir, provenance=meta)
    counts = ds.manifest["counts"]["train"]["relations"]
    print(f"wrote {len(paths)} files under {args.out_dir}; train relation counts: {counts}")
    return 0


class _CollectingScorer(Scorer):
    """Captures queries so eval can emit a request file without a model."""

    name = "collector"

    def __init__(self):
        self.queries: list[ScoreQuery] = []

    def score(self, q: ScoreQuery) -> float:
        self.queries.append(q)
        return 0.5


def parse_scorer_uri(uri: str, gc=None, manifest=None) -> Scorer:
    scheme, _, rest = uri.partition(":")
    if not rest:
        raise UsageError(f"scorer URI needs a scheme: {uri!r}")
    if scheme == "file":
        return FileScorer(rest)
    if scheme == "http" or scheme == "https":
        return HttpScorer(uri)
    if scheme == "oracle":
        split = urlsplit(f"//{rest}" if "?" in rest else f"//{rest}")
        name = split.netloc or rest
        kwargs = dict(parse_qsl(split.query))
        params = OracleParams(
            p_hi=float(kwargs.pop("p_hi", 0.9)),
            p_lo=float(kwargs.pop("p_lo", 0.01)),
            p_mid=float(kwargs.pop("p_mid", 0.45)),
        )
        return build_oracle(name, gc=gc, manifest=manifest, params=params, **kwargs)
    raise UsageError(f"unknown scorer scheme {scheme!r}")


def _run_eval_task(args, scorer, sets, inventory, manifest) -> dict:
    tie_rng = np.random.default_rng(args.tie_seed)
    restrict = None
    if args.covered_only:
        if manifest is None:
            raise DataError("--covered-only needs --manifest")
        counts = dataset_mod.mention_order_counts(manifest)
        over = args.over or {"infer_nocausal": "unrelated"}.get(args.task, "causal")
        base = sets.causal if over == "causal" else sets.unrelated
        restrict = eval_mod.covered_pairs(counts, base)
    common = dict(tie=args.tie, tie_rng=tie_rng, pairs=restrict)
    if args.task in eval_mod.TASK_NAMES:
        rep = eval_mod.run_task(
            scorer, args.task, sets, inventory, over=args.over, position=args.position, **common
        )
        return {"task": rep.to_json_dict()}
    if args.task == "position":
        rep = eval_mod.position_report(
            scorer, sets, inventory, trained_majority=args.trained_majority,
            probe=args.probe, **common,
        )
        return {"position": rep.to_json_dict()}
    if args.task == "post_hoc":
        rep = eval_mod.post_hoc_report(scorer, sets, inventory, **common)
        return {"post_hoc": rep.to_json_dict()}
    if args.task == "frequency":
        if manifest is None:
            raise DataError("--task frequency needs --manifest")
        freqs = dataset_mod.temporal_pair_counts(manifest)
        buckets = eval_mod.frequency_report(
            scorer, sets, inventory, freqs, trained_majority=args.trained_majority,
            buckets=args.buckets, **common,
        )
        return {"frequency": [b.to_json_dict() for b in buckets]}
    if args.task == "seen_unseen":
        if manifest is None or not manifest.get("augmentation"):
            raise DataError("--task seen_unseen needs an augmented dataset manifest")
        aug = manifest["augmentation"]
        rep = eval_mod.seen_unseen_report(
            scorer,
            [tuple(e) for e in aug["seen_edges"]],
            [tuple(e) for e in aug["unseen_edges"]],
            inventory,
            tie=args.tie,
            tie_rng=tie_rng,
        )
        return {"seen_unseen": rep.to_json_dict()}
    raise UsageError(f"unhandled task {args.task}")


def cmd_eval(args) -> int:
    gc, gn = graphs_mod.load_graphs(args.graph)
    manifest = dataset_mod.read_manifest(args.manifest) if args.manifest else None
    inventory = load_inventory(args.inventory)
    sets = eval_mod.build_test_sets(gc)

    if args.emit_queries:
        collector = _CollectingScorer()
        _run_eval_task(args, collector, sets, inventory, manifest)
        write_query_file(collector.queries, args.emit_queries)
        print(f"wrote {len({q.query_id for q in collector.queries})} unique queries to {args.emit_queries}")
        return 0

    if not args.scorer:
        raise UsageError("--scorer is required (or use --emit-queries)")
    scorer = parse_scorer_uri(args.scorer, gc=gc, manifest=manifest)
    result = _run_eval_task(args, scorer, sets, inventory, manifest)
    hashes = {**_hash_if_exists(args.graph), **_hash_if_exists(args.manifest)}
    report = {
        "scorer": scorer.describe(),
        **result,
        "provenance": provenance("eval", {k: v for k, v in vars(args).items() if k != "command"}, hashes),
    }
    text = canonical_json(report, indent=2) + "\n"
    if args.report_json:
        atomic_write_text(args.report_json, text)
    if args.report_md:
        atomic_write_text(args.report_md, eval_mod.render_markdown(report, title=f"eval {args.task}"))
    if not args.report_json and not args.report_md:
        print(text, end="")
    else:
        section = next(iter(result.values()))
        summary = {
            k: v for k, v in (section.items() if isinstance(section, dict) else [])
            if isinstance(v, (int, float, str))
        }
        print(f"{args.task}: {summary}")
    return 0


def cmd_analyze_corpus(args) -> int:
    if args.window <= 0:
        raise UsageError("--window must be positive")
    pairs = corpus_mod.load_pairs(args.pairs)
    result = corpus_mod.scan(
        args.input,
        pairs,
        window=args.window,
        fmt=args.format,
        workers=args.workers,
        word_boundary=args.word_boundary,
    )
    report = corpus_mod.aggregate(result, min_cooccurrence=args.min_cooccur)
    payload = report.to_json_dict()
    payload["provenance"] = provenance(
        "analyze-corpus",
        {k: v for k, v in vars(args).items() if k != "command"},
        _hash_if_exists(args.pairs),
    )
    if args.out_csv:
        corpus_mod.write_csv(report, args.out_csv)
    if args.out_json:
        atomic_write_text(args.out_json, canonical_json(payload, indent=2) + "\n")
    frac = report.pooled_x_first_fraction
    print(
        "scanned %d documents (%d skipped): %d pairs kept, pooled cause-first fraction %s"
        % (
            report.documents,
            report.skipped,
            len(report.rows),
            f"{frac:.4f}" if frac is not None else "n/a",
        )
    )
    return 0


_COMMANDS = {
    "gen-graph": cmd_gen_graph,
    "gen-data": cmd_gen_data,
    "eval": cmd_eval,
    "analyze-corpus": cmd_analyze_corpus,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except ScorerError as e:
        print(f"scorer error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
