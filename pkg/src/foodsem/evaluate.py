"""Response parsing, NER→NEL chaining, and macro-weighted NEL scoring.

``parse_response`` is deliberately forgiving: model output rarely follows the
requested format exactly, so it strips any opener phrase, tolerates newline-
separated entries, full URIs, stray whitespace, and trailing periods, and
never raises — unusable output becomes an empty, non-meaningful prediction.

Scoring counts (instance, gold mention, entity) triples.  Predicted mentions
that have no gold entry are ignored entirely; only mentions the gold response
links are taken into consideration.  Per-entity precision/recall/F1 are
aggregated into macro-weighted metrics using each entity's gold frequency as
its weight.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import AlignmentError
from .irpairs import IRPair, TaskKind
from .pools import MENTION_SLOT
from .refs import ACCEPTED_NAMESPACES, EntityRef, Ontology, parse_entity_ref
from .util import collapse_ws, normalize_mention

log = logging.getLogger(__name__)


@dataclass
class PredictionMap:
    """Parsed predictions of one response: normalized mention → entity set."""

    instance_id: str
    ontology: Ontology
    entries: dict[str, set[EntityRef]] = field(default_factory=dict)
    meaningful: bool = True
    parse_notes: list[str] = field(default_factory=list)


# An opener phrase ends at the first colon that does not start a URI scheme
# ("http://...").  A colon is only treated as an opener boundary when no
# "mention - refs" separator occurred before it.
_OPENER_RE = re.compile(r":(?!//)")


def split_opener(text: str) -> tuple[Optional[str], str]:
    """Split ``"Certainly, ...: payload"`` into (opener with colon, payload)."""
    m = _OPENER_RE.search(text)
    if m and " - " not in text[: m.start()]:
        return text[: m.end()], text[m.end() :]
    return None, text


def _split_top_level_commas(text: str) -> list[str]:
    """Split on commas outside [...] so bracketed labels stay intact."""
    pieces = []
    depth = 0
    start = 0
    for i, ch in enumerate(text):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth = max(0, depth - 1)
        elif ch == "," and depth == 0:
            pieces.append(text[start:i])
            start = i + 1
    pieces.append(text[start:])
    return pieces


def _newline_subsplit(piece: str) -> list[str]:
    """Break a multi-entry piece on newlines, keeping ref continuations glued
    to their entry (an entry is any fragment containing " - ")."""
    fragments = []
    for frag in piece.split("\n"):
        frag = frag.strip()
        if not frag:
            continue
        if " - " in frag or not fragments:
            fragments.append(frag)
        else:
            fragments[-1] = f"{fragments[-1]} {frag}"
    return fragments


def parse_response(text: str, ontology: Ontology, instance_id: str = "") -> PredictionMap:
    """Extract mention → entity predictions from free-form model output.

    Never raises: malformed fragments become ``parse_notes`` entries, and a
    response yielding zero in-ontology references comes back with
    ``meaningful = False`` and empty entries.
    """
    pred = PredictionMap(instance_id=instance_id, ontology=ontology)
    if text is None or not text.strip():
        pred.meaningful = False
        pred.parse_notes.append("empty response")
        return pred

    opener, payload = split_opener(text)
    if opener is None:
        pred.parse_notes.append("no opener phrase found")

    entries: list[str] = []
    for piece in _split_top_level_commas(payload):
        if piece.count(" - ") > 1:
            entries.extend(_newline_subsplit(piece))
        elif piece.strip():
            entries.append(collapse_ws(piece))

    accepted = ACCEPTED_NAMESPACES[ontology]
    for entry in entries:
        idx = entry.find(" - ")
        if idx < 0:
            pred.parse_notes.append(f"entry without mention separator: {entry!r}")
            continue
        mention = normalize_mention(entry[:idx])
        if not mention:
            pred.parse_notes.append(f"entry with empty mention: {entry!r}")
            continue
        refs: set[EntityRef] = set()
        for token in entry[idx + 3 :].split(";"):
            token = token.strip().rstrip(".").strip()
            if not token:
                continue
            try:
                ref = parse_entity_ref(token)
            except Exception:
                pred.parse_notes.append(f"unparseable reference: {token!r}")
                continue
            if ref.namespace not in accepted:
                pred.parse_notes.append(
                    f"reference outside {ontology.value}: {token!r} dropped"
                )
                continue
            refs.add(ref)
        if refs:
            pred.entries.setdefault(mention, set()).update(refs)
        else:
            pred.parse_notes.append(f"no usable references for mention {mention!r}")

    if not pred.entries:
        pred.meaningful = False
        pred.entries = {}
    return pred


def parse_ner_response(text: str) -> list[str]:
    """Extract the mention list from a NER response, casing preserved.

    Mentions contain no newlines, so newline-separated lists are treated
    like comma-separated ones.
    """
    if text is None or not text.strip():
        return []
    _, payload = split_opener(text)
    payload = payload.replace("\n", ",")
    mentions = []
    for piece in _split_top_level_commas(payload):
        mention = collapse_ws(piece.strip().rstrip(".").strip())
        if mention and mention not in mentions:
            mentions.append(mention)
    return mentions


def chain_ner_to_nel(ner_prediction: Sequence[str], nel_instruction_template: str) -> str:
    """Fill a NEL instruction template with predicted mentions (normalized).

    An empty prediction yields an instruction with an empty mention slot;
    that degenerate case is logged so downstream scores can be interpreted.
    """
    mentions = [normalize_mention(m) for m in ner_prediction if normalize_mention(m)]
    if not mentions:
        log.warning("chaining an empty mention list into a NEL instruction")
    return nel_instruction_template.replace(MENTION_SLOT, ", ".join(mentions))


# ---------------------------------------------------------------------------
# Scoring


@dataclass(frozen=True)
class GoldInstance:
    instance_id: str
    entries: dict[str, frozenset[EntityRef]]


def gold_from_pair(pair: IRPair) -> GoldInstance:
    assert pair.task is TaskKind.NEL and pair.gold is not None
    return GoldInstance(
        instance_id=pair.pair_id,
        entries={g.mention: frozenset(g.refs) for g in pair.gold},
    )


@dataclass
class EntityScore:
    gold_count: int
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float


@dataclass
class EvalReport:
    per_entity: dict[EntityRef, EntityScore]
    macro_weighted: dict[str, float]
    counts: dict[str, int]


def _prf(tp: int, fp: int, gold_count: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / gold_count if gold_count else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def score_nel(gold: Sequence[GoldInstance], preds: Sequence[PredictionMap]) -> EvalReport:
    """Macro-weighted scoring over (instance, gold mention, entity) triples.

    A gold triple (i, m, e) is a true positive when the prediction for
    instance i maps mention m to a set containing e, otherwise a false
    negative.  A predicted entity on a gold mention whose gold set lacks it
    is a false positive.  Mentions predicted but absent from gold are
    ignored.  Missing or non-meaningful predictions contribute only misses.

    Raises :class:`AlignmentError` for a prediction without a gold instance
    or two predictions claiming the same instance.
    """
    by_instance: dict[str, PredictionMap] = {}
    gold_ids = {g.instance_id for g in gold}
    if len(gold_ids) != len(gold):
        raise AlignmentError("duplicate instance_id in gold")
    for pred in preds:
        if pred.instance_id not in gold_ids:
            raise AlignmentError(f"prediction for unknown instance {pred.instance_id!r}")
        if pred.instance_id in by_instance:
            raise AlignmentError(f"two predictions for instance {pred.instance_id!r}")
        by_instance[pred.instance_id] = pred

    gold_count: dict[EntityRef, int] = {}
    tp: dict[EntityRef, int] = {}
    fp: dict[EntityRef, int] = {}
    non_meaningful = 0
    for g in gold:
        pred = by_instance.get(g.instance_id)
        meaningful = pred is not None and pred.meaningful
        if not meaningful:
            non_meaningful += 1
        entries = pred.entries if meaningful else {}
        for mention, gold_refs in g.entries.items():
            predicted = entries.get(mention, set())
            for e in gold_refs:
                gold_count[e] = gold_count.get(e, 0) + 1
                if e in predicted:
                    tp[e] = tp.get(e, 0) + 1
            for e in predicted - gold_refs:
                fp[e] = fp.get(e, 0) + 1

    per_entity: dict[EntityRef, EntityScore] = {}
    for e in set(gold_count) | set(fp) | set(tp):
        gc = gold_count.get(e, 0)
        t, f = tp.get(e, 0), fp.get(e, 0)
        p, r, f1 = _prf(t, f, gc)
        per_entity[e] = EntityScore(
            gold_count=gc, tp=t, fp=f, fn=gc - t, precision=p, recall=r, f1=f1
        )

    total_gold = sum(gold_count.values())
    macro = {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    if total_gold:
        for e, gc in gold_count.items():
            w = gc / total_gold
            score = per_entity[e]
            macro["precision"] += w * score.precision
            macro["recall"] += w * score.recall
            macro["f1"] += w * score.f1
    return EvalReport(
        per_entity=per_entity,
        macro_weighted=macro,
        counts={"instances": len(gold), "non_meaningful": non_meaningful},
    )


def score_ner(
    gold_mentions: Iterable[str], predicted_mentions: Iterable[str]
) -> dict[str, float]:
    """Exact-match set precision/recall/F1 over normalized mentions."""
    g = {normalize_mention(m) for m in gold_mentions if normalize_mention(m)}
    p = {normalize_mention(m) for m in predicted_mentions if normalize_mention(m)}
    if not g and not p:
        return {"precision": 1.0, "recall": 1.0, "f1": 1.0}
    tp = len(g & p)
    prec = tp / len(p) if p else 0.0
    rec = tp / len(g) if g else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return {"precision": prec, "recall": rec, "f1": f1}


# ---------------------------------------------------------------------------
# Report export


def report_to_json(report: EvalReport) -> dict:
    rows = [
        {
            "ontology": e.ontology.value,
            "namespace": e.namespace,
            "local_id": e.local_id,
            "gold_count": s.gold_count,
            "tp": s.tp,
            "fp": s.fp,
            "fn": s.fn,
            "precision": s.precision,
            "recall": s.recall,
            "f1": s.f1,
        }
        for e, s in sorted(
            report.per_entity.items(),
            key=lambda kv: (-kv[1].gold_count, kv[0].namespace, kv[0].local_id),
        )
    ]
    return {
        "per_entity": rows,
        "macro_weighted": report.macro_weighted,
        "counts": report.counts,
    }


def summary_line(fold: object, dataset_id: str, report: EvalReport) -> str:
    """One row per (fold, dataset): the table layout used for result summaries."""
    m = report.macro_weighted
    c = report.counts
    return (
        f"fold={fold} dataset={dataset_id} "
        f"precision={m['precision']:.3f} recall={m['recall']:.3f} f1={m['f1']:.3f} "
        f"instances={c['instances']} non_meaningful={c['non_meaningful']}"
    )
