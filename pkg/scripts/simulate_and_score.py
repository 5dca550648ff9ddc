#!/usr/bin/env python3
"""Corruption sweep: how scores degrade as simulated responses get noisier.

Builds the balanced pipeline in memory, then for each corruption profile
simulates responses for every test instance of every fold, parses them, and
prints one macro-weighted score row per (profile, fold, dataset).  The
zero-corruption row doubles as an end-to-end identity check (all 1.000);
format noise alone should also stay at 1.000, which is the parser-robustness
claim in executable form.
"""

import argparse
import sys
from collections import defaultdict

from foodsem.balance import build_lexicon, entity_distribution, generate_artificial_pairs
from foodsem.bioc import group_ontology_variants, load_corpus
from foodsem.evaluate import gold_from_pair, parse_response, score_nel, summary_line
from foodsem.folds import (
    DATASET_NER,
    dedupe_by_instruction,
    materialize_fold,
    plan_folds,
    split_into_datasets,
)
from foodsem.gateway import CorruptionProfile, simulate_response
from foodsem.irpairs import TaskKind, build_ir_sequence
from foodsem.pools import default_pool_path, load_phrase_pools
from foodsem.refs import Ontology

PROFILES = {
    "zero": CorruptionProfile(),
    "format_noise": CorruptionProfile(p_format_noise=1.0),
    "drop_20": CorruptionProfile(p_drop_mention=0.2),
    "corrupt_20": CorruptionProfile(p_corrupt_ref=0.2),
    "empty_20": CorruptionProfile(p_empty=0.2),
    "mixed": CorruptionProfile(
        p_drop_mention=0.1, p_corrupt_ref=0.1, p_format_noise=0.5, p_empty=0.1
    ),
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--corpus-dir", default=str(default_pool_path().parent / "toy")
    )
    parser.add_argument("--threshold", type=int, default=150)
    parser.add_argument("--folds", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    pools = load_phrase_pools()
    docs = load_corpus(args.corpus_dir)
    sequences = [
        build_ir_sequence(b, pools, rng_seed=args.seed)
        for b in group_ontology_variants(docs)
    ]
    cafeteria = [p for s in sequences for p in s.pairs]
    artificial = []
    for ontology in Ontology:
        nel = [p for p in cafeteria if p.task is TaskKind.NEL and p.ontology is ontology]
        if not nel:
            continue
        report = entity_distribution(nel, threshold=args.threshold, ontology=ontology)
        artificial.extend(
            generate_artificial_pairs(report, build_lexicon(nel), pools, rng_seed=args.seed)
        )
    unique, _ = dedupe_by_instruction(cafeteria + artificial)
    plan = plan_folds(split_into_datasets(unique), k=args.folds, rng_seed=args.seed)
    pairs_by_id = {p.pair_id: p for p in unique}
    print(f"instances={len(unique)} (cafeteria={len(cafeteria)}, artificial={len(artificial)})")

    for name, profile in PROFILES.items():
        for fold_index in range(plan.k):
            manifest = materialize_fold(plan, fold_index)
            by_dataset = defaultdict(list)
            for ref in manifest.test:
                if ref.dataset_id != DATASET_NER:
                    by_dataset[ref.dataset_id].append(pairs_by_id[ref.instance_id])
            for dataset_id in sorted(by_dataset):
                pairs = by_dataset[dataset_id]
                ontology = pairs[0].ontology
                gold = [gold_from_pair(p) for p in pairs]
                preds = [
                    parse_response(simulate_response(p, profile), ontology, p.pair_id)
                    for p in pairs
                ]
                report = score_nel(gold, preds)
                print(f"profile={name} {summary_line(fold_index, dataset_id, report)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
