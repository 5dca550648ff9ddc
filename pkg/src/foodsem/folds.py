"""Leakage-free k-fold planning over the four IR datasets.

Each dataset (NER plus one NEL dataset per ontology) is shuffled with its own
derived seed and dealt into k chunks of near-equal size.  A fold's test set
is chunk *i* of every dataset; its training set is everything else plus a
capped number of general-instruction instances that fit the token budget,
shuffled together.  Instances are tracked by (dataset, id, instruction) so
train/test leakage can be checked on instruction text alone.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

from .errors import ConfigError, EmptyDataset
from .irpairs import IRPair, TaskKind, flat_text, pair_to_record
from .util import derive_seed, write_jsonl

log = logging.getLogger(__name__)

DATASET_NER = "ner_cafeteria"
DATASET_IDS = ("nel_foodon", "nel_hansard", "nel_snomed", DATASET_NER)

DEFAULT_K = 5
DEFAULT_TOKEN_BUDGET = 1024
DEFAULT_GENERAL_TARGET = 34229


def default_token_counter(text: str) -> int:
    """Cheap token-count stand-in: ⌈characters / 4⌉.

    Real subword counts depend on a specific tokenizer, which stays out of
    this component; callers needing exact counts can pass their own counter.
    """
    return (len(text) + 3) // 4


def split_into_datasets(pairs: Iterable[IRPair]) -> dict[str, list[IRPair]]:
    """Group pairs into the four fold datasets (general pairs are excluded)."""
    datasets: dict[str, list[IRPair]] = {ds: [] for ds in DATASET_IDS}
    for pair in pairs:
        if pair.task is TaskKind.NER:
            datasets[DATASET_NER].append(pair)
        elif pair.task is TaskKind.NEL:
            datasets[f"nel_{pair.ontology.value}"].append(pair)
    return {ds: items for ds, items in datasets.items() if items}


def dedupe_by_instruction(pairs: Sequence[IRPair]) -> tuple[list[IRPair], int]:
    """Keep the first pair per instruction text; returns (unique, dropped)."""
    seen: set[str] = set()
    unique = []
    for pair in pairs:
        if pair.instruction in seen:
            continue
        seen.add(pair.instruction)
        unique.append(pair)
    return unique, len(pairs) - len(unique)


@dataclass
class FoldPlan:
    k: int
    rng_seed: int
    #: dataset_id -> {instance_id -> chunk index}, in shuffled order.
    assignments: dict[str, dict[str, int]]
    #: dataset_id -> {instance_id -> instruction text}, for leakage checks.
    instructions: dict[str, dict[str, str]] = field(default_factory=dict)


@dataclass(frozen=True)
class InstanceRef:
    dataset_id: str
    instance_id: str
    instruction: str


@dataclass
class FoldManifest:
    fold_index: int
    train: list[InstanceRef]
    test: list[InstanceRef]
    general_count: int
    notes: list[str] = field(default_factory=list)


def plan_folds(
    datasets: dict[str, list[IRPair]], k: int = DEFAULT_K, rng_seed: int = 0
) -> FoldPlan:
    """Shuffle each dataset with a derived seed and deal instances into k
    chunks round-robin, so chunk sizes differ by at most one."""
    if k < 2:
        raise ConfigError(f"k must be ≥ 2, got {k}")
    assignments: dict[str, dict[str, int]] = {}
    instructions: dict[str, dict[str, str]] = {}
    for ds in sorted(datasets):
        pairs = datasets[ds]
        if not pairs:
            raise EmptyDataset(f"dataset {ds} is empty")
        shuffled = list(pairs)
        random.Random(derive_seed(rng_seed, "plan", ds)).shuffle(shuffled)
        assignments[ds] = {p.pair_id: i % k for i, p in enumerate(shuffled)}
        instructions[ds] = {p.pair_id: p.instruction for p in shuffled}
    return FoldPlan(k=k, rng_seed=rng_seed, assignments=assignments, instructions=instructions)


def materialize_fold(
    plan: FoldPlan,
    fold_index: int,
    general: Sequence[IRPair] = (),
    token_budget: int = DEFAULT_TOKEN_BUDGET,
    general_target: int = DEFAULT_GENERAL_TARGET,
    token_counter: Callable[[str], int] = default_token_counter,
) -> FoldManifest:
    """Assemble one fold: chunk ``fold_index`` of every dataset as the test
    set, the rest as training, topped up with general instances whose flat
    rendering fits the token budget, then shuffled with the fold seed.

    A shortfall of general instances is recorded in the manifest notes, never
    fatal.
    """
    if not 0 <= fold_index < plan.k:
        raise ConfigError(f"fold_index {fold_index} outside 0..{plan.k - 1}")
    train: list[InstanceRef] = []
    test: list[InstanceRef] = []
    for ds in sorted(plan.assignments):
        instr = plan.instructions.get(ds, {})
        for instance_id, chunk in plan.assignments[ds].items():
            ref = InstanceRef(ds, instance_id, instr.get(instance_id, ""))
            (test if chunk == fold_index else train).append(ref)

    notes: list[str] = []
    general_refs: list[InstanceRef] = []
    for pair in general:
        if len(general_refs) >= general_target:
            break
        if token_counter(flat_text(pair)) <= token_budget:
            general_refs.append(InstanceRef("general", pair.pair_id, pair.instruction))
    if general and len(general_refs) < general_target:
        notes.append(
            f"general shortfall: wanted {general_target}, "
            f"only {len(general_refs)} fit the {token_budget}-token budget"
        )
    train.extend(general_refs)
    random.Random(derive_seed(plan.rng_seed, "fold", fold_index)).shuffle(train)
    return FoldManifest(
        fold_index=fold_index,
        train=train,
        test=test,
        general_count=len(general_refs),
        notes=notes,
    )


def verify_no_leakage(manifest: FoldManifest) -> list[str]:
    """Instruction texts present in both train and test; empty means clean."""
    train_texts = {r.instruction for r in manifest.train}
    return sorted({r.instruction for r in manifest.test} & train_texts)


# ---------------------------------------------------------------------------
# Persistence


def save_plan(plan: FoldPlan, path: Union[str, Path]) -> None:
    """Write plan records plus a .meta.json sidecar holding k and the seed."""
    path = Path(path)
    records = [
        {"dataset_id": ds, "instance_id": iid, "chunk": chunk}
        for ds in sorted(plan.assignments)
        for iid, chunk in plan.assignments[ds].items()
    ]
    write_jsonl(path, records)
    meta = {"k": plan.k, "rng_seed": plan.rng_seed}
    path.with_suffix(path.suffix + ".meta.json").write_text(
        json.dumps(meta), encoding="utf-8"
    )


def load_plan(
    path: Union[str, Path], datasets: Optional[dict[str, list[IRPair]]] = None
) -> FoldPlan:
    """Read a persisted plan; pass the datasets to rejoin instruction texts
    (needed for leakage checks on materialized folds)."""
    path = Path(path)
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        k, rng_seed = int(meta["k"]), int(meta["rng_seed"])
    else:
        k, rng_seed = 0, 0
    assignments: dict[str, dict[str, int]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            assignments.setdefault(rec["dataset_id"], {})[rec["instance_id"]] = int(
                rec["chunk"]
            )
    if k == 0:
        k = 1 + max((c for ds in assignments.values() for c in ds.values()), default=0)
        log.warning("%s: no meta sidecar; inferred k=%d, assuming seed 0", path, k)
    instructions: dict[str, dict[str, str]] = {}
    if datasets:
        for ds, pairs in datasets.items():
            instructions[ds] = {p.pair_id: p.instruction for p in pairs}
    return FoldPlan(k=k, rng_seed=rng_seed, assignments=assignments, instructions=instructions)


def export_fold(
    manifest: FoldManifest,
    pairs_by_id: dict[str, IRPair],
    out_dir: Union[str, Path],
) -> dict[str, int]:
    """Write train/test IR files and the flat training text for one fold."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def pair_of(ref: InstanceRef) -> IRPair:
        return pairs_by_id[ref.instance_id]

    train_pairs = [pair_of(r) for r in manifest.train]
    test_pairs = [pair_of(r) for r in manifest.test]
    write_jsonl(out_dir / "train.jsonl", [pair_to_record(p) for p in train_pairs])
    write_jsonl(out_dir / "test.jsonl", [pair_to_record(p) for p in test_pairs])
    with open(out_dir / "train.txt", "w", encoding="utf-8") as fh:
        for pair in train_pairs:
            fh.write(flat_text(pair) + "\n")
    return {"train": len(train_pairs), "test": len(test_pairs)}
