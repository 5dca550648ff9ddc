"""Instruction-response pair construction from annotated document bundles.

One document bundle becomes one IR sequence: a NER pair (instruction + the
document text, response listing every unique food mention in first-occurrence
order) followed by one NEL pair per annotated ontology in the fixed order
Hansard, FoodOn, SNOMED-CT.

Mentions are reconciled across ontology variants before building the pairs:
all resolved annotation spans are pooled, spans strictly contained in a
larger span are folded into it (an annotation covering just "cheese" inside
a span another variant annotated as "cheese ball" counts as a "cheese ball"
mention), and the surviving spans — ordered by position, deduplicated
case-insensitively — define both the NER mention list and the NEL mention
keys.  This guarantees the sequence invariant that the NER mention list is a
superset of every NEL pair's mention keys.
"""

from __future__ import annotations

import random
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .bioc import BiocDocument, DocumentBundle, _normalized_index, resolve_spans
from .errors import EmptyPool
from .pools import (
    MENTION_SLOT,
    NER_INSTRUCTION,
    RESPONSE_OPENER,
    PhrasePool,
    draw_phrase,
    nel_instruction_kind,
)
from .refs import EntityRef, Ontology, UriMode, render_entity_ref
from .util import collapse_ws, derive_seed, normalize_mention

#: Ontology order of NEL pairs inside a sequence.
NEL_ORDER = (Ontology.HANSARD, Ontology.FOODON, Ontology.SNOMEDCT)


class TaskKind(str, Enum):
    NER = "ner"
    NEL = "nel"
    GENERAL = "general"


class PairSource(str, Enum):
    CAFETERIA = "cafeteria"
    ARTIFICIAL = "artificial"
    GENERAL = "general"


@dataclass(frozen=True)
class NelGold:
    """Gold linking for one mention: normalized key plus its entity refs."""

    mention: str
    refs: tuple[EntityRef, ...]


#: NER gold is an ordered mention list; NEL gold an ordered (mention, refs)
#: mapping; general-instruction pairs carry no gold.
Gold = Optional[Union[tuple[str, ...], tuple[NelGold, ...]]]


@dataclass
class IRPair:
    pair_id: str
    task: TaskKind
    instruction: str
    response: str
    gold: Gold
    source: PairSource
    source_id: str
    ontology: Optional[Ontology] = None

    def __post_init__(self) -> None:
        assert (self.task is TaskKind.NEL) == (self.ontology is not None), (
            f"pair {self.pair_id}: ontology must be set exactly for NEL tasks"
        )


@dataclass
class IRSequence:
    source_id: str
    pairs: list[IRPair] = field(default_factory=list)


def flat_text(pair: IRPair) -> str:
    """Single-line fine-tuning rendering: ``[INST] instruction [/INST] response``."""
    return f"[INST] {collapse_ws(pair.instruction)} [/INST] {collapse_ws(pair.response)}"


def gold_to_json(gold: Gold) -> object:
    if gold is None:
        return None
    if gold and isinstance(gold[0], NelGold):
        return [
            {"mention": g.mention, "refs": [r.to_record() for r in g.refs]} for g in gold
        ]
    return list(gold)


def gold_from_json(obj: object, task: TaskKind) -> Gold:
    if obj is None:
        return None
    if task is TaskKind.NEL:
        return tuple(
            NelGold(g["mention"], tuple(EntityRef.from_record(r) for r in g["refs"]))
            for g in obj
        )
    return tuple(obj)


def pair_to_record(pair: IRPair, sequence_index: Optional[int] = None) -> dict:
    return {
        "pair_id": pair.pair_id,
        "task": pair.task.value,
        "ontology": pair.ontology.value if pair.ontology else None,
        "instruction": pair.instruction,
        "response": pair.response,
        "gold": gold_to_json(pair.gold),
        "source": pair.source.value,
        "source_id": pair.source_id,
        "sequence_index": sequence_index,
    }


def pair_from_record(rec: dict) -> IRPair:
    task = TaskKind(rec["task"])
    return IRPair(
        pair_id=rec["pair_id"],
        task=task,
        ontology=Ontology(rec["ontology"]) if rec.get("ontology") else None,
        instruction=rec["instruction"],
        response=rec["response"],
        gold=gold_from_json(rec.get("gold"), task),
        source=PairSource(rec["source"]),
        source_id=rec["source_id"],
    )


# ---------------------------------------------------------------------------
# Canonical mention extraction


def _to_norm_span(span: tuple[int, int], norm: str, posmap: list[int]) -> tuple[int, int]:
    """Convert a span in original text coordinates to normalized coordinates."""
    i = bisect_left(posmap, span[0])
    while norm[i] == " ":
        i += 1
    j = bisect_right(posmap, span[1] - 1) - 1
    while norm[j] == " ":
        j -= 1
    return (i, j + 1)


@dataclass
class _MentionTable:
    """Reconciled mentions of one bundle, shared by NER and NEL pairs."""

    ner_mentions: list[str]  # document casing, first-occurrence order
    nel_gold: dict[Ontology, tuple[NelGold, ...]]


def _mention_table(bundle: DocumentBundle) -> _MentionTable:
    variants = [bundle.variants[o] for o in NEL_ORDER if o in bundle.variants]
    for doc in variants:
        resolve_spans(doc)

    # Normalized text is identical across variants (their texts agree up to
    # whitespace), so normalized spans from different variants are comparable.
    norm_ref, posmap_ref = _normalized_index(bundle.full_text)
    anchored: list[tuple[BiocDocument, object, tuple[int, int]]] = []
    unanchored: list[tuple[BiocDocument, object]] = []
    for doc in variants:
        norm_v, posmap_v = _normalized_index(doc.full_text)
        for ann in doc.annotations:
            if ann.resolved_span is None:
                unanchored.append((doc, ann))
            else:
                anchored.append((doc, ann, _to_norm_span(ann.resolved_span, norm_v, posmap_v)))

    all_spans = sorted({span for _, _, span in anchored})
    canonical = [
        s
        for s in all_spans
        if not any(t != s and t[0] <= s[0] and s[1] <= t[1] for t in all_spans)
    ]

    def canon_of(s: tuple[int, int]) -> tuple[int, int]:
        containers = [c for c in canonical if c[0] <= s[0] and s[1] <= c[1]]
        return min(containers, key=lambda c: (c[1] - c[0], c[0]))

    def doc_casing(norm_span: tuple[int, int]) -> str:
        a, b = norm_span
        return collapse_ws(bundle.full_text[posmap_ref[a] : posmap_ref[b - 1] + 1])

    # NER list: canonical spans in document order, deduplicated by normalized
    # text, then any unanchored mentions appended in annotation order.
    ner_mentions: list[str] = []
    key_order: dict[str, int] = {}
    for span in canonical:
        text = doc_casing(span)
        key = normalize_mention(text)
        if key not in key_order:
            key_order[key] = len(ner_mentions)
            ner_mentions.append(text)
    for _, ann in unanchored:
        text = collapse_ws(ann.text)
        key = normalize_mention(text)
        if key not in key_order:
            key_order[key] = len(ner_mentions)
            ner_mentions.append(text)

    nel_gold: dict[Ontology, tuple[NelGold, ...]] = {}
    for doc in variants:
        refs_by_key: dict[str, dict[EntityRef, None]] = {}
        for d, ann, span in anchored:
            if d is not doc:
                continue
            key = normalize_mention(doc_casing(canon_of(span)))
            bucket = refs_by_key.setdefault(key, {})
            for ref in ann.entity_refs:
                bucket[ref] = None
        for d, ann in unanchored:
            if d is not doc:
                continue
            key = normalize_mention(ann.text)
            bucket = refs_by_key.setdefault(key, {})
            for ref in ann.entity_refs:
                bucket[ref] = None
        entries = sorted(refs_by_key.items(), key=lambda kv: key_order[kv[0]])
        nel_gold[doc.ontology] = tuple(
            NelGold(key, tuple(bucket)) for key, bucket in entries
        )
    return _MentionTable(ner_mentions, nel_gold)


# ---------------------------------------------------------------------------
# Pair construction


def render_nel_response(
    opener: str, gold: tuple[NelGold, ...], uri_mode: UriMode
) -> str:
    entries = [
        f"{g.mention} - {'; '.join(render_entity_ref(r, uri_mode) for r in g.refs)}"
        for g in gold
    ]
    return f"{opener} {', '.join(entries)}."


def make_nel_instruction(phrase: str, mentions: list[str]) -> str:
    return phrase.replace(MENTION_SLOT, ", ".join(mentions))


def build_ir_sequence(
    bundle: DocumentBundle,
    pools: dict[str, PhrasePool],
    uri_mode: UriMode = UriMode.SHORT,
    rng_seed: int = 0,
) -> IRSequence:
    """Convert one bundle into its IR sequence.

    All phrase draws are deterministic in (rng_seed, bundle.doc_id).  Raises
    :class:`EmptyPool` when a required phrase kind is missing.
    """
    if not bundle.variants:
        raise EmptyPool(f"document {bundle.doc_id}: bundle has no ontology variants")
    rng = random.Random(derive_seed(rng_seed, "sequence", bundle.doc_id))
    table = _mention_table(bundle)

    ner_phrase = draw_phrase(pools, NER_INSTRUCTION, rng)
    ner_opener = draw_phrase(pools, RESPONSE_OPENER, rng)
    seq = IRSequence(source_id=bundle.doc_id)
    seq.pairs.append(
        IRPair(
            pair_id=f"{bundle.doc_id}/ner",
            task=TaskKind.NER,
            instruction=f"{ner_phrase} {collapse_ws(bundle.full_text)}",
            response=f"{ner_opener} {', '.join(table.ner_mentions)}.",
            gold=tuple(table.ner_mentions),
            source=PairSource.CAFETERIA,
            source_id=bundle.doc_id,
        )
    )

    for ont in NEL_ORDER:
        if ont not in bundle.variants:
            continue
        gold = table.nel_gold[ont]
        phrase = draw_phrase(pools, nel_instruction_kind(ont), rng)
        opener = draw_phrase(pools, RESPONSE_OPENER, rng)
        seq.pairs.append(
            IRPair(
                pair_id=f"{bundle.doc_id}/nel/{ont.value}",
                task=TaskKind.NEL,
                ontology=ont,
                instruction=make_nel_instruction(phrase, [g.mention for g in gold]),
                response=render_nel_response(opener, gold, uri_mode),
                gold=gold,
                source=PairSource.CAFETERIA,
                source_id=bundle.doc_id,
            )
        )
    return seq


def sequences_to_records(sequences: list[IRSequence]) -> list[dict]:
    """Flatten sequences to JSONL-ready records; pairs of one sequence share
    a sequence_index."""
    records = []
    for i, seq in enumerate(sequences):
        for pair in seq.pairs:
            records.append(pair_to_record(pair, sequence_index=i))
    return records
