"""Bridge commands: serve an HTTP scorer, or score a request file offline."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lm-scorer-bridge", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("serve", help="HTTP endpoint: POST /score and /score_batch")
    s.add_argument("--model", required=True, help="model id or local path")
    s.add_argument("--port", type=int, default=8741)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--device", default="cpu")

    f = sub.add_parser("score-file", help="score request JSONL into response JSONL")
    f.add_argument("--model", required=True)
    f.add_argument("--in", dest="infile", required=True, help="JSONL of {id, prefix, completion}")
    f.add_argument("--out", dest="outfile", required=True, help="JSONL of {id, logprob, num_subtokens}")
    f.add_argument("--device", default="cpu")
    return p


def cmd_serve(args) -> int:
    import uvicorn

    from scorer_bridge.scoring import CompletionScorer
    from scorer_bridge.server import create_app

    scorer = CompletionScorer(args.model, device=args.device)
    uvicorn.run(create_app(scorer), host=args.host, port=args.port, log_level="info")
    return 0


def cmd_score_file(args) -> int:
    from scorer_bridge.scoring import BadRequest, CompletionScorer, ScoreRequest

    scorer = CompletionScorer(args.model, device=args.device)
    out_lines = []
    try:
        with open(args.infile, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    req = ScoreRequest(
                        id=str(row["id"]), prefix=row["prefix"], completion=row["completion"]
                    )
                except (json.JSONDecodeError, KeyError, TypeError) as e:
                    print(f"{args.infile}:{lineno}: bad request row: {e}", file=sys.stderr)
                    return 2
                try:
                    resp = scorer.score_request(req)
                except BadRequest as e:
                    print(f"{args.infile}:{lineno}: {e}", file=sys.stderr)
                    return 2
                out_lines.append(json.dumps(resp.to_dict(), sort_keys=True))
    except OSError as e:
        print(f"cannot read {args.infile}: {e}", file=sys.stderr)
        return 2
    Path(args.outfile).parent.mkdir(parents=True, exist_ok=True)
    Path(args.outfile).write_text("".join(l + "\n" for l in out_lines), encoding="utf-8")
    print(f"scored {len(out_lines)} queries -> {args.outfile}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args)
    return cmd_score_file(args)


if __name__ == "__main__":
    sys.exit(main())
