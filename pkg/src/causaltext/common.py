"""Shared plumbing: canonical JSON, hashing, atomic writes, RNG streams."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any

import numpy as np


class DataError(Exception):
    """Invalid or inconsistent input data (bad files, bad configs)."""


class ScorerError(Exception):
    """A scorer backend failed or returned unusable results."""


class UsageError(Exception):
    """Bad command-line usage."""


def canonical_json(obj: Any, indent: int | None = None) -> str:
    """Deterministic JSON text: sorted keys, fixed separators."""
    if indent is None:
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return json.dumps(obj, sort_keys=True, indent=indent)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via temp file + rename so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rng_stream(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for a (seed, index...) coordinate.

    Parallel and serial runs that address the same coordinates draw the
    same values, which is what makes dataset builds worker-count
    independent.
    """
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.default_rng(np.random.SeedSequence((seed, *stream)))


def worker_count(explicit: int | None = None) -> int:
    """Resolve worker count: explicit flag, else CAUSALTEXT_WORKERS, else 1."""
    if explicit is not None:
        if explicit < 1:
            raise ValueError("worker count must be >= 1")
        return explicit
    env = os.environ.get("CAUSALTEXT_WORKERS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("CAUSALTEXT_WORKERS must be >= 1")
        return n
    return 1


def provenance(command: str, args: dict[str, Any], hashes: dict[str, str] | None = None) -> dict:
    from causaltext import __version__

    return {
        "tool": "causaltext",
        "version": __version__,
        "command": command,
        "args": args,
        "input_hashes": hashes or {},
    }
