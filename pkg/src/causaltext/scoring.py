"""Scorer contract: anything that maps (prefix, completion) to a probability.

Queries carry both the raw text pair and the structured relation fields,
so analytic oracles can answer exactly while file- and HTTP-backed model
scorers only look at the text.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from causaltext.common import ScorerError


@dataclass(frozen=True)
class ScoreQuery:
    """One completion-probability request.

    prefix + completion is a full template rendering; completion is the
    final event mention (or answer token). first/second give the event
    mention order of the full sentence; cause/effect are set for
    directional causal claims.
    """

    prefix: str
    completion: str
    kind: str
    first: int
    second: int | None
    cause: int | None = None
    effect: int | None = None
    template_id: str = ""

    @property
    def query_id(self) -> str:
        payload = json.dumps(
            [self.prefix, self.completion, self.kind, self.template_id],
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def sentence(self) -> str:
        return self.prefix + self.completion

    def to_request(self) -> dict:
        return {"id": self.query_id, "prefix": self.prefix, "completion": self.completion}


class Scorer:
    """Base scorer; implementations return probabilities in (0, 1]."""

    name = "scorer"

    def params(self) -> dict:
        return {}

    def score(self, query: ScoreQuery) -> float:
        raise NotImplementedError

    def score_batch(self, queries: Sequence[ScoreQuery]) -> list[float]:
        return [self.score(q) for q in queries]

    def describe(self) -> str:
        params = self.params()
        return f"{self.name}({params})" if params else self.name


class FileScorer(Scorer):
    """Scores from a response JSONL of {id, logprob} produced offline.

    The request side is emitted by the harness as JSONL of
    {id, prefix, completion}; any external model can fill in logprobs.
    """

    name = "file"

    def __init__(self, path: str | Path):
        self.path = str(path)
        self._logprobs: dict[str, float] = {}
        try:
            with open(path, "r", encoding="utf-8") as f:
                for lineno, line in enumerate(f, 1):
                    if not line.strip():
                        continue
                    try:
                        row = json.loads(line)
                        self._logprobs[str(row["id"])] = float(row["logprob"])
                    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                        raise ScorerError(f"{path}:{lineno}: bad response row: {e}") from e
        except OSError as e:
            raise ScorerError(f"cannot read scorer responses {path}: {e}") from e

    def params(self) -> dict:
        return {"path": self.path, "responses": len(self._logprobs)}

    def score(self, query: ScoreQuery) -> float:
        return self.score_batch([query])[0]

    def score_batch(self, queries: Sequence[ScoreQuery]) -> list[float]:
        missing = [q.query_id for q in queries if q.query_id not in self._logprobs]
        if missing:
            shown = ", ".join(sorted(set(missing))[:20])
            raise ScorerError(
                f"scorer file {self.path} is missing {len(set(missing))} query ids: {shown}"
            )
        return [math.exp(self._logprobs[q.query_id]) for q in queries]


class HttpScorer(Scorer):
    """Scores over HTTP against a /score_batch endpoint."""

    name = "http"

    def __init__(self, endpoint: str, timeout: float = 120.0, batch_size: int = 64):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.batch_size = batch_size

    def params(self) -> dict:
        return {"endpoint": self.endpoint}

    def score(self, query: ScoreQuery) -> float:
        return self.score_batch([query])[0]

    def score_batch(self, queries: Sequence[ScoreQuery]) -> list[float]:
        import requests

        out: dict[str, float] = {}
        for lo in range(0, len(queries), self.batch_size):
            batch = queries[lo : lo + self.batch_size]
            body = [q.to_request() for q in batch]
            try:
                resp = requests.post(
                    f"{self.endpoint}/score_batch", json=body, timeout=self.timeout
                )
                resp.raise_for_status()
                rows = resp.json()
            except requests.RequestException as e:
                raise ScorerError(f"scorer endpoint failed: {e}") from e
            for row in rows:
                out[str(row["id"])] = float(row["logprob"])
        missing = [q.query_id for q in queries if q.query_id not in out]
        if missing:
            raise ScorerError(f"endpoint dropped {len(missing)} query ids")
        return [math.exp(out[q.query_id]) for q in queries]


def write_query_file(queries: Sequence[ScoreQuery], path: str | Path) -> None:
    from causaltext.common import atomic_write_text

    seen = set()
    lines = []
    for q in queries:
        if q.query_id in seen:
            continue
        seen.add(q.query_id)
        lines.append(json.dumps(q.to_request(), sort_keys=True) + "\n")
    atomic_write_text(path, "".join(lines))
