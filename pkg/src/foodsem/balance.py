"""Entity-coverage analysis and artificial NEL pair synthesis.

Ontology entities follow a long-tailed mention distribution; entities seen
fewer than a threshold number of times (default 150) get topped up with
artificial linking pairs.  For each under-covered entity, its surface labels
are cycled until the deficit is met; all label instances of one ontology are
pooled, shuffled, and partitioned into sets of 7, 9, or 12 labels (one final
undersized remainder allowed), each set becoming one NEL pair.
"""

from __future__ import annotations

import csv
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .errors import DuplicateUnavoidable, MissingLabel, MixedOntology
from .irpairs import (
    IRPair,
    NelGold,
    PairSource,
    TaskKind,
    make_nel_instruction,
    render_nel_response,
)
from .pools import RESPONSE_OPENER, PhrasePool, draw_phrase, nel_instruction_kind
from .refs import EntityRef, Ontology, UriMode
from .util import derive_seed, normalize_mention

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 150
DEFAULT_SET_SIZES = (7, 9, 12)

#: Bounded re-draws before giving up on a unique instruction for one set.
_MAX_REDRAWS = 20


@dataclass
class DistributionReport:
    """Per-entity mention counts for one ontology, with threshold deficits."""

    ontology: Optional[Ontology]
    counts: dict[EntityRef, int]
    threshold: int = DEFAULT_THRESHOLD

    @property
    def deficits(self) -> dict[EntityRef, int]:
        return {e: max(0, self.threshold - k) for e, k in self.counts.items()}


def entity_distribution(
    pairs: Sequence[IRPair],
    threshold: int = DEFAULT_THRESHOLD,
    ontology: Optional[Ontology] = None,
) -> DistributionReport:
    """Count gold (pair, mention, entity) occurrences per entity.

    All pairs must be NEL pairs of one ontology (:class:`MixedOntology`
    otherwise).  An explicit ``ontology`` is only needed for an empty list.
    """
    counts: dict[EntityRef, int] = {}
    for pair in pairs:
        if pair.task is not TaskKind.NEL:
            raise MixedOntology(f"pair {pair.pair_id} is not a NEL pair")
        if ontology is None:
            ontology = pair.ontology
        elif pair.ontology is not ontology:
            raise MixedOntology(
                f"pair {pair.pair_id} is {pair.ontology.value}, expected {ontology.value}"
            )
        for entry in pair.gold or ():
            for ref in entry.refs:
                counts[ref] = counts.get(ref, 0) + 1
    return DistributionReport(ontology=ontology, counts=counts, threshold=threshold)


def report_rows(report: DistributionReport) -> list[dict]:
    """Tabular view of a report, sorted by count descending."""
    deficits = report.deficits
    rows = [
        {
            "ontology": e.ontology.value,
            "namespace": e.namespace,
            "local_id": e.local_id,
            "count": k,
            "deficit": deficits[e],
        }
        for e, k in report.counts.items()
    ]
    rows.sort(key=lambda r: (-r["count"], r["namespace"], r["local_id"]))
    return rows


def write_report_csv(report: DistributionReport, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["ontology", "namespace", "local_id", "count", "deficit"]
        )
        writer.writeheader()
        writer.writerows(report_rows(report))


@dataclass
class LabelLexicon:
    """Ordered surface labels per entity, used to synthesize artificial pairs."""

    labels: dict[EntityRef, list[str]] = field(default_factory=dict)

    def merged_with(self, other: "LabelLexicon") -> "LabelLexicon":
        merged = {e: list(ls) for e, ls in self.labels.items()}
        for e, ls in other.labels.items():
            bucket = merged.setdefault(e, [])
            bucket.extend(l for l in ls if l not in bucket)
        return LabelLexicon(merged)


def build_lexicon(pairs: Iterable[IRPair]) -> LabelLexicon:
    """Harvest each entity's observed gold mention keys as its labels."""
    labels: dict[EntityRef, list[str]] = {}
    for pair in pairs:
        if pair.task is not TaskKind.NEL:
            continue
        for entry in pair.gold or ():
            for ref in entry.refs:
                bucket = labels.setdefault(ref, [])
                if entry.mention not in bucket:
                    bucket.append(entry.mention)
    return LabelLexicon(labels)


def load_lexicon(path: Union[str, Path]) -> LabelLexicon:
    """Read a CSV lexicon with columns ontology, namespace, local_id, label."""
    labels: dict[EntityRef, list[str]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            label = normalize_mention(row["label"])
            if not label:
                raise MissingLabel(f"{path}: empty label for {row['local_id']}")
            ref = EntityRef(Ontology(row["ontology"]), row["namespace"], row["local_id"])
            bucket = labels.setdefault(ref, [])
            if label not in bucket:
                bucket.append(label)
    return LabelLexicon(labels)


def generate_artificial_pairs(
    report: DistributionReport,
    lexicon: LabelLexicon,
    pools: dict[str, PhrasePool],
    set_sizes: Sequence[int] = DEFAULT_SET_SIZES,
    rng_seed: int = 0,
    uri_mode: UriMode = UriMode.SHORT,
) -> list[IRPair]:
    """Synthesize NEL pairs that close every positive deficit in the report.

    Emits exactly Σ deficits label instances.  Partition rule: after the
    seeded shuffle, repeatedly draw a set size uniformly among the sizes that
    still fit in the remaining labels; once fewer than min(set_sizes) remain,
    they form one final undersized set.  Instructions are guaranteed unique
    (bounded re-draws, then :class:`DuplicateUnavoidable`).
    """
    ont = report.ontology
    if ont is None:
        return []
    sizes = sorted(set(int(s) for s in set_sizes))
    rng = random.Random(derive_seed(rng_seed, "balance", ont.value))

    instances: list[tuple[str, EntityRef]] = []
    deficits = report.deficits
    for entity in sorted(deficits, key=lambda e: (e.namespace, e.local_id)):
        d = deficits[entity]
        if d <= 0:
            continue
        entity_labels = lexicon.labels.get(entity)
        if not entity_labels:
            raise MissingLabel(
                f"no labels for deficit entity {entity.namespace}-{entity.local_id}"
            )
        instances.extend((entity_labels[i % len(entity_labels)], entity) for i in range(d))

    rng.shuffle(instances)

    label_sets: list[list[tuple[str, EntityRef]]] = []
    i = 0
    while i < len(instances):
        remaining = len(instances) - i
        feasible = [s for s in sizes if s <= remaining]
        if not feasible:
            label_sets.append(instances[i:])
            break
        size = rng.choice(feasible)
        label_sets.append(instances[i : i + size])
        i += size

    pairs: list[IRPair] = []
    seen_instructions: set[str] = set()
    sets_with_duplicate_labels = 0
    for n, label_set in enumerate(label_sets):
        buckets: dict[str, dict[EntityRef, None]] = {}
        for label, entity in label_set:
            buckets.setdefault(label, {})[entity] = None
        if len(buckets) < len(label_set):
            sets_with_duplicate_labels += 1
        gold = tuple(NelGold(label, tuple(refs)) for label, refs in buckets.items())
        mentions = [g.mention for g in gold]

        instruction = None
        for _ in range(_MAX_REDRAWS):
            phrase = draw_phrase(pools, nel_instruction_kind(ont), rng)
            candidate = make_nel_instruction(phrase, mentions)
            if candidate not in seen_instructions:
                instruction = candidate
                break
        if instruction is None:
            raise DuplicateUnavoidable(
                f"no unique instruction for artificial {ont.value} set {n} "
                f"after {_MAX_REDRAWS} draws"
            )
        seen_instructions.add(instruction)
        opener = draw_phrase(pools, RESPONSE_OPENER, rng)

        pair_id = f"artificial/{ont.value}/{n:06d}"
        pairs.append(
            IRPair(
                pair_id=pair_id,
                task=TaskKind.NEL,
                ontology=ont,
                instruction=instruction,
                response=render_nel_response(opener, gold, uri_mode),
                gold=gold,
                source=PairSource.ARTIFICIAL,
                source_id=pair_id,
            )
        )
    if sets_with_duplicate_labels:
        log.info(
            "%s: %d label sets contained one label for multiple entities (gold unioned)",
            ont.value,
            sets_with_duplicate_labels,
        )
    return pairs


def assert_no_leakage(
    artificial: Sequence[IRPair], cafeteria: Sequence[IRPair] = ()
) -> list[dict]:
    """Report instruction-text duplicates within artificial pairs and between
    artificial and source-corpus pairs; an empty list means clean."""
    violations = []
    cafeteria_index: dict[str, str] = {}
    for pair in cafeteria:
        cafeteria_index.setdefault(pair.instruction, pair.pair_id)
    seen: dict[str, str] = {}
    for pair in artificial:
        if pair.instruction in seen:
            violations.append(
                {
                    "pair_id_a": seen[pair.instruction],
                    "pair_id_b": pair.pair_id,
                    "instruction": pair.instruction,
                }
            )
        else:
            seen[pair.instruction] = pair.pair_id
        if pair.instruction in cafeteria_index:
            violations.append(
                {
                    "pair_id_a": cafeteria_index[pair.instruction],
                    "pair_id_b": pair.pair_id,
                    "instruction": pair.instruction,
                }
            )
    return violations
