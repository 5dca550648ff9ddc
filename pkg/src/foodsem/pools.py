"""Instruction and response-opener phrase pools.

Pools are plain line-delimited JSON files of ``{"kind": ..., "phrase": ...}``
records so they can be regenerated or edited without touching code.  Five
kinds exist: one NER instruction pool, one NEL instruction pool per ontology,
and one shared response-opener pool.

NEL instruction phrases must embed a ``{mentions}`` slot: the mention list is
substituted in, which keeps every instruction document-specific (a bare
"link the entities" phrase repeated across documents would collide under the
instruction-text leakage checks downstream).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .errors import EmptyPool, PoolFormatError
from .refs import Ontology

NER_INSTRUCTION = "ner_instruction"
RESPONSE_OPENER = "response_opener"
MENTION_SLOT = "{mentions}"


def nel_instruction_kind(ontology: Ontology) -> str:
    return f"nel_instruction:{ontology.value}"


ALL_KINDS = (
    NER_INSTRUCTION,
    nel_instruction_kind(Ontology.HANSARD),
    nel_instruction_kind(Ontology.FOODON),
    nel_instruction_kind(Ontology.SNOMEDCT),
    RESPONSE_OPENER,
)


@dataclass
class PhrasePool:
    kind: str
    phrases: list[str]


def default_pool_path() -> Path:
    return Path(str(resources.files("foodsem").joinpath("data/default_pools.jsonl")))


def load_phrase_pools(path: Optional[Union[str, Path]] = None) -> dict[str, PhrasePool]:
    """Load and validate phrase pools, keyed by kind.

    With no path, loads the packaged defaults.  Raises
    :class:`PoolFormatError` on malformed records, unknown kinds, duplicate
    or empty phrases, or NEL phrases missing the mention slot;
    :class:`EmptyPool` when the file holds no records at all.
    """
    p = Path(path) if path is not None else default_pool_path()
    pools: dict[str, PhrasePool] = {}
    seen: dict[str, set] = {}
    n_records = 0
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PoolFormatError(f"{p}:{lineno}: not valid JSON") from exc
            if not isinstance(rec, dict) or "kind" not in rec or "phrase" not in rec:
                raise PoolFormatError(f"{p}:{lineno}: record needs 'kind' and 'phrase'")
            kind, phrase = rec["kind"], rec["phrase"]
            if kind not in ALL_KINDS:
                raise PoolFormatError(f"{p}:{lineno}: unknown pool kind {kind!r}")
            if not isinstance(phrase, str) or not phrase.strip():
                raise PoolFormatError(f"{p}:{lineno}: empty phrase")
            phrase = phrase.strip()
            if kind.startswith("nel_instruction") and MENTION_SLOT not in phrase:
                raise PoolFormatError(
                    f"{p}:{lineno}: NEL instruction phrase lacks the {MENTION_SLOT} slot"
                )
            if phrase in seen.setdefault(kind, set()):
                raise PoolFormatError(f"{p}:{lineno}: duplicate phrase in {kind}: {phrase!r}")
            seen[kind].add(phrase)
            pools.setdefault(kind, PhrasePool(kind, [])).phrases.append(phrase)
            n_records += 1
    if n_records == 0:
        raise EmptyPool(f"{p}: no pool records")
    return pools


def draw_phrase(pools: dict[str, PhrasePool], kind: str, rng: random.Random) -> str:
    """Draw one phrase of the given kind; EmptyPool if none are available."""
    pool = pools.get(kind)
    if pool is None or not pool.phrases:
        raise EmptyPool(f"no phrases of kind {kind!r}")
    return rng.choice(pool.phrases)
