"""Small shared helpers: seed derivation, text normalization, JSONL I/O."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Iterator


def derive_seed(*parts: Any) -> int:
    """Derive a stable 64-bit sub-seed from arbitrary parts.

    All randomness in the toolkit flows from integer seeds expanded through
    this function, so any stage or per-item draw is reproducible in isolation
    and independent of Python's per-process string hashing.
    """
    blob = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


def collapse_ws(text: str) -> str:
    """Trim and collapse all internal whitespace runs to single spaces."""
    return " ".join(text.split())


def normalize_mention(text: str) -> str:
    """Canonical mention key: lowercase, trimmed, whitespace collapsed."""
    return collapse_ws(text).lower()


def write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    """Write records as one JSON object per line; returns the record count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)
