"""Cause-before-effect mention-order statistics over a text corpus.

For each (cause, effect) pair and each document, the scanner finds the
first mention of both strings (case-insensitive substring); when the two
first-mention start offsets lie within the window, the document counts
toward whichever string appeared first. Offsets are measured in
characters from the document start.

The hot path batches ASCII documents into one buffer and gates candidate
positions through two cache-resident bigram tables keyed on each
pattern's rarest trigram, then verifies the survivors with vectorized
byte compares; per-document Python work happens only for actual matches.
Non-ASCII documents and patterns shorter than three characters fall back
to an exact per-document search with identical semantics.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources as importlib_resources
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from causaltext.common import DataError, worker_count

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 50
DEFAULT_MIN_COOCCURRENCE = 100


@dataclass(frozen=True)
class PairSpec:
    cause: str
    effect: str

    def __post_init__(self):
        object.__setattr__(self, "cause", self.cause.strip().lower())
        object.__setattr__(self, "effect", self.effect.strip().lower())
        if not self.cause or not self.effect:
            raise DataError("pair strings must be nonempty")
        if self.cause == self.effect:
            raise DataError(f"pair has identical strings: {self.cause!r}")


@dataclass
class PairCounts:
    x_first: int = 0
    y_first: int = 0

    @property
    def total(self) -> int:
        return self.x_first + self.y_first


def default_pairs() -> list[PairSpec]:
    text = (importlib_resources.files("causaltext") / "resources" / "corpus_pairs.csv").read_text()
    return parse_pairs_csv(text)


def parse_pairs_csv(text: str) -> list[PairSpec]:
    import csv
    import io

    rows = list(csv.reader(io.StringIO(text)))
    if rows and rows[0][:2] == ["cause", "effect"]:
        rows = rows[1:]
    pairs = []
    for row in rows:
        if not row or not "".join(row).strip():
            continue
        if len(row) != 2:
            raise DataError(f"pair rows need 2 columns, got {row!r}")
        pairs.append(PairSpec(row[0], row[1]))
    if not pairs:
        raise DataError("no pairs given")
    return pairs


def load_pairs(path: str | Path | None) -> list[PairSpec]:
    if path is None:
        return default_pairs()
    return parse_pairs_csv(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# multi-pattern first-occurrence search


_CHAR_ORDER = " etaoinshrdlcumwfgypbvkjxqz"
_RARITY = {ord(c): i for i, c in enumerate(_CHAR_ORDER)}


def _trigram_rarity(tri: bytes) -> int:
    return sum(_RARITY.get(b, 29) for b in tri)


class MultiPatternSearcher:
    """First occurrence of every pattern in every document of a batch."""

    def __init__(self, patterns: Sequence[str], word_boundary: bool = False):
        if not patterns:
            raise DataError("no patterns to search")
        self.patterns = [p.lower() for p in patterns]
        self.word_boundary = word_boundary
        self._long: list[tuple[bytes, int, int]] = []  # (bytes, anchor k, pid)
        self._short: list[tuple[str, int]] = []
        self._lut_a = np.zeros(65536, dtype=bool)
        self._lut_b = np.zeros(65536, dtype=bool)
        self._group_of = np.full(65536, 0xFFFF, dtype=np.uint16)
        self._groups: dict[int, list[tuple[bytes, int, int]]] = {}
        self._maxlen = max(len(p) for p in self.patterns)
        for pid, p in enumerate(self.patterns):
            if len(p) < 3 or not p.isascii():
                self._short.append((p, pid))
                continue
            b = p.encode()
            k = max(range(len(b) - 2), key=lambda i: _trigram_rarity(b[i : i + 3]))
            code_a = (b[k] << 8) | b[k + 1]
            code_b = (b[k + 1] << 8) | b[k + 2]
            self._lut_a[code_a] = True
            self._lut_b[code_b] = True
            self._groups.setdefault(code_a, []).append((b, k, pid))
        self._group_list = [self._groups[c] for c in sorted(self._groups)]
        for rank, code_a in enumerate(sorted(self._groups)):
            self._group_of[code_a] = rank
        self._isword = np.zeros(256, dtype=bool)
        for c in range(256):
            ch = chr(c)
            self._isword[c] = ch.isalnum() or ch == "_"

    def _bounded(self, text: str, pos: int, length: int) -> bool:
        before = text[pos - 1] if pos > 0 else " "
        after = text[pos + length] if pos + length < len(text) else " "
        isw = lambda ch: ch.isalnum() or ch == "_"
        return not isw(before) and not isw(after)

    def _find_exact(self, low: str, pattern: str) -> int:
        """First (optionally word-bounded) occurrence in one document."""
        pos = low.find(pattern)
        if not self.word_boundary:
            return pos
        while pos != -1 and not self._bounded(low, pos, len(pattern)):
            pos = low.find(pattern, pos + 1)
        return pos

    def search_document(self, text: str) -> dict[int, int]:
        """Exact reference path: pattern id -> first offset."""
        low = text.lower()
        out = {}
        for pid, p in enumerate(self.patterns):
            pos = self._find_exact(low, p)
            if pos >= 0:
                out[pid] = pos
        return out

    def search_batch(self, docs: Sequence[str]) -> list[dict[int, int]]:
        """Vectorized path over a batch; exact same results as the
        reference path for every document."""
        results: list[dict[int, int]] = [dict() for _ in docs]
        ascii_ids = []
        lowered: list[bytes] = []
        for i, d in enumerate(docs):
            if d.isascii():
                ascii_ids.append(i)
                lowered.append(d.lower().encode())
            else:
                results[i] = self.search_document(d)
        if ascii_ids and self._group_list:
            self._scan_ascii(lowered, ascii_ids, results)
        if ascii_ids and self._short:
            for i, b in zip(ascii_ids, lowered):
                low = b.decode()
                for p, pid in self._short:
                    pos = self._find_exact(low, p)
                    if pos >= 0:
                        results[i][pid] = pos
        return results

    def _scan_ascii(self, lowered: list[bytes], ascii_ids: list[int], results: list[dict[int, int]]) -> None:
        starts = np.zeros(len(lowered) + 1, dtype=np.int64)
        for i, b in enumerate(lowered):
            starts[i + 1] = starts[i] + len(b) + 1
        big = b"\x00" + b"\x00".join(lowered) + b"\x00" * (self._maxlen + 2)
        doc_starts = starts[:-1] + 1  # account for the leading NUL
        arr = np.frombuffer(big, dtype=np.uint8)
        code = (arr[:-1].astype(np.uint16) << 8) | arr[1:]
        mask = self._lut_a[code[:-1]] & self._lut_b[code[1:]]
        cand = np.flatnonzero(mask)
        if not len(cand):
            return
        gids = self._group_of[code[cand]]
        order = np.argsort(gids, kind="stable")
        cand = cand[order]
        gids = gids[order]
        bounds = np.searchsorted(gids, np.arange(len(self._group_list) + 1))
        for g, group in enumerate(self._group_list):
            sel = cand[bounds[g] : bounds[g + 1]]
            if not len(sel):
                continue
            for pat, k, pid in group:
                live = sel - k
                live = live[live >= 1]
                for j, byte in enumerate(pat):
                    if j in (k, k + 1):
                        continue
                    live = live[arr[live + j] == byte]
                    if not len(live):
                        break
                if not len(live):
                    continue
                if self.word_boundary:
                    ok = ~self._isword[arr[live - 1]] & ~self._isword[arr[live + len(pat)]]
                    live = live[ok]
                    if not len(live):
                        continue
                doc_idx = np.searchsorted(doc_starts, live, side="right") - 1
                # live ascends, so the first hit per document wins
                uniq, first_at = np.unique(doc_idx, return_index=True)
                offsets = live[first_at] - doc_starts[uniq]
                for di, off in zip(uniq.tolist(), offsets.tolist()):
                    results[ascii_ids[di]][pid] = int(off)


# ---------------------------------------------------------------------------
# corpus readers


def _jsonl_documents(path: Path, start: int, end: int) -> Iterator[tuple[str | None, int]]:
    """Documents from lines starting in [start, end); None marks a skip."""
    with open(path, "rb") as f:
        if start > 0:
            # consume the tail of the line containing byte start-1, which
            # the previous shard owns; a line starting exactly at start
            # stays ours
            f.seek(start - 1)
            f.readline()
        while True:
            pos = f.tell()
            if pos >= end:
                break
            line = f.readline()
            if not line:
                break
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                text = doc["text"]
                if not isinstance(text, str):
                    raise TypeError("text field is not a string")
            except (json.JSONDecodeError, KeyError, TypeError, UnicodeDecodeError):
                yield None, len(line)
                continue
            yield text, len(line)


def _list_inputs(path: str | Path, fmt: str) -> list[Path]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"corpus input {path} does not exist")
    if path.is_dir():
        suffix = ".jsonl" if fmt == "jsonl" else None
        files = sorted(
            p for p in path.iterdir() if p.is_file() and (suffix is None or p.suffix == suffix)
        )
        if not files:
            raise DataError(f"no corpus files under {path}")
        return files
    return [path]


@dataclass
class ScanResult:
    counts: dict[PairSpec, PairCounts]
    documents: int = 0
    skipped: int = 0
    bytes_read: int = 0

    def merge(self, other: "ScanResult") -> "ScanResult":
        for pair, c in other.counts.items():
            mine = self.counts.setdefault(pair, PairCounts())
            mine.x_first += c.x_first
            mine.y_first += c.y_first
        self.documents += other.documents
        self.skipped += other.skipped
        self.bytes_read += other.bytes_read
        return self


class _PairCounter:
    def __init__(self, pairs: Sequence[PairSpec], window: int, word_boundary: bool):
        self.pairs = list(pairs)
        self.window = window
        patterns = sorted({s for p in pairs for s in (p.cause, p.effect)})
        self.pid = {s: i for i, s in enumerate(patterns)}
        self.searcher = MultiPatternSearcher(patterns, word_boundary=word_boundary)
        self.pair_pids = [(self.pid[p.cause], self.pid[p.effect]) for p in pairs]

    def count_batch(self, docs: list[str], result: ScanResult) -> None:
        hits = self.searcher.search_batch(docs)
        for found in hits:
            if len(found) < 2:
                continue
            for pair, (cx, cy) in zip(self.pairs, self.pair_pids):
                ox = found.get(cx)
                oy = found.get(cy)
                if ox is None or oy is None:
                    continue
                if abs(ox - oy) > self.window:
                    continue
                c = result.counts.setdefault(pair, PairCounts())
                # ties (identical first offsets) count as cause-first
                if ox <= oy:
                    c.x_first += 1
                else:
                    c.y_first += 1


_SCAN_STATE: dict = {}


def _scan_init(pairs: list[PairSpec], window: int, word_boundary: bool, fmt: str, batch_docs: int) -> None:
    _SCAN_STATE["counter"] = _PairCounter(pairs, window, word_boundary)
    _SCAN_STATE["fmt"] = fmt
    _SCAN_STATE["batch_docs"] = batch_docs


def _scan_shard(shard: tuple) -> ScanResult:
    counter: _PairCounter = _SCAN_STATE["counter"]
    fmt = _SCAN_STATE["fmt"]
    batch_docs = _SCAN_STATE["batch_docs"]
    result = ScanResult(counts={})
    batch: list[str] = []

    def flush():
        if batch:
            counter.count_batch(batch, result)
            batch.clear()

    if fmt == "jsonl":
        path, start, end = shard
        for text, nbytes in _jsonl_documents(Path(path), start, end):
            result.bytes_read += nbytes
            if text is None:
                result.skipped += 1
                continue
            result.documents += 1
            batch.append(text)
            if len(batch) >= batch_docs:
                flush()
    else:
        for path in shard:
            try:
                text = Path(path).read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError):
                result.skipped += 1
                continue
            result.bytes_read += len(text)
            result.documents += 1
            batch.append(text)
            if len(batch) >= batch_docs:
                flush()
    flush()
    return result


def _jsonl_shards(files: list[Path], per_file: int) -> list[tuple]:
    shards = []
    for f in files:
        size = os.path.getsize(f)
        if size == 0:
            continue
        step = max(1, -(-size // per_file))
        cuts = list(range(0, size, step)) + [size]
        for lo, hi in zip(cuts, cuts[1:]):
            if hi > lo:
                shards.append((str(f), lo, hi))
    return shards


def scan(
    inputs: str | Path,
    pairs: Sequence[PairSpec],
    window: int = DEFAULT_WINDOW,
    fmt: str = "jsonl",
    workers: int | None = None,
    word_boundary: bool = False,
    batch_docs: int = 512,
) -> ScanResult:
    """Scan a corpus for pair mention-order counts.

    ``inputs`` is a JSONL file/directory ({"text": ...} per line) or, with
    fmt="txt", a plain-text file/directory with one document per file.
    Results are independent of sharding and worker count.
    """
    if window <= 0:
        raise DataError("window must be positive")
    if fmt not in ("jsonl", "txt"):
        raise DataError(f"unknown corpus format {fmt!r}")
    pairs = list(pairs)
    if not pairs:
        raise DataError("no pairs to scan for")
    nworkers = worker_count(workers)
    files = _list_inputs(inputs, fmt)
    if fmt == "jsonl":
        shards: list = _jsonl_shards(files, per_file=max(1, nworkers))
    else:
        shards = [files[i::nworkers] for i in range(nworkers)]
        shards = [s for s in shards if s]

    total = ScanResult(counts={})
    if nworkers == 1 or len(shards) <= 1:
        _scan_init(pairs, window, word_boundary, fmt, batch_docs)
        for shard in shards:
            total.merge(_scan_shard(shard))
    else:
        with ProcessPoolExecutor(
            max_workers=nworkers,
            initializer=_scan_init,
            initargs=(pairs, window, word_boundary, fmt, batch_docs),
        ) as pool:
            for part in pool.map(_scan_shard, shards):
                total.merge(part)
    if total.skipped:
        log.warning("skipped %d unreadable documents", total.skipped)
    for pair in pairs:
        total.counts.setdefault(pair, PairCounts())
    return total


@dataclass
class AggregateReport:
    rows: list[dict]
    pooled_x_first_fraction: float | None
    min_cooccurrence: int
    documents: int = 0
    skipped: int = 0

    def to_json_dict(self) -> dict:
        return {
            "min_cooccurrence": self.min_cooccurrence,
            "pairs_kept": len(self.rows),
            "pooled_x_first_fraction": self.pooled_x_first_fraction,
            "documents": self.documents,
            "skipped": self.skipped,
            "rows": self.rows,
        }


def aggregate(result: ScanResult, min_cooccurrence: int = DEFAULT_MIN_COOCCURRENCE) -> AggregateReport:
    """Drop sparse pairs and pool the cause-first fraction over the rest."""
    rows = []
    sum_x = 0
    sum_total = 0
    for pair in sorted(result.counts, key=lambda p: (p.cause, p.effect)):
        c = result.counts[pair]
        if c.total < min_cooccurrence:
            continue
        rows.append(
            {
                "cause": pair.cause,
                "effect": pair.effect,
                "x_first": c.x_first,
                "y_first": c.y_first,
                "total": c.total,
                "x_first_fraction": c.x_first / c.total,
            }
        )
        sum_x += c.x_first
        sum_total += c.total
    pooled = (sum_x / sum_total) if sum_total else None
    return AggregateReport(
        rows=rows,
        pooled_x_first_fraction=pooled,
        min_cooccurrence=min_cooccurrence,
        documents=result.documents,
        skipped=result.skipped,
    )


def write_csv(report: AggregateReport, path: str | Path) -> None:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["cause", "effect", "x_first", "y_first", "total", "x_first_fraction"])
    for row in report.rows:
        writer.writerow(
            [
                row["cause"],
                row["effect"],
                row["x_first"],
                row["y_first"],
                row["total"],
                f"{row['x_first_fraction']:.6f}",
            ]
        )
    from causaltext.common import atomic_write_text

    atomic_write_text(path, buf.getvalue())
