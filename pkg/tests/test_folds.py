"""Cross-validation fold planning: disjointness, coverage, leakage, persistence."""

import json
import logging
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foodsem.errors import ConfigError, EmptyDataset
from foodsem.folds import (
    DATASET_IDS,
    DATASET_NER,
    default_token_counter,
    dedupe_by_instruction,
    export_fold,
    load_plan,
    materialize_fold,
    plan_folds,
    split_into_datasets,
    save_plan,
    verify_no_leakage,
)
from foodsem.irpairs import IRPair, NelGold, PairSource, TaskKind, flat_text
from foodsem.refs import EntityRef, Ontology


def _pair(pair_id, ontology=None, instruction=None, source=PairSource.CAFETERIA):
    task = TaskKind.NEL if ontology else TaskKind.NER
    gold = (
        (NelGold(f"m{pair_id}", (EntityRef(ontology, "FOODON", "1"),)),)
        if ontology
        else (f"m{pair_id}",)
    )
    return IRPair(
        pair_id=pair_id,
        task=task,
        ontology=ontology,
        instruction=instruction or f"instruction for {pair_id}",
        response=f"ok: m{pair_id}.",
        gold=gold,
        source=source,
        source_id=pair_id,
    )


def _general(pair_id, instruction_len=40):
    return IRPair(
        pair_id=pair_id,
        task=TaskKind.GENERAL,
        instruction="g" * instruction_len,
        response="fine.",
        gold=None,
        source=PairSource.GENERAL,
        source_id=pair_id,
    )


def random_datasets(rng, min_size=5, max_size=40):
    datasets = {}
    for ds in DATASET_IDS:
        ontology = None
        if ds.startswith("nel_"):
            ontology = {
                "nel_foodon": Ontology.FOODON,
                "nel_hansard": Ontology.HANSARD,
                "nel_snomed": Ontology.SNOMEDCT,
            }[ds]
        n = rng.randint(min_size, max_size)
        datasets[ds] = [_pair(f"{ds}/{i}", ontology) for i in range(n)]
    return datasets


def test_token_counter_rounds_up():
    assert default_token_counter("") == 0
    assert default_token_counter("abc") == 1
    assert default_token_counter("abcd") == 1
    assert default_token_counter("abcde") == 2


def test_split_into_datasets_routes_by_task_and_ontology():
    pairs = [
        _pair("a/ner"),
        _pair("a/nel/foodon", Ontology.FOODON),
        _pair("a/nel/hansard", Ontology.HANSARD),
        _pair("a/nel/snomed", Ontology.SNOMEDCT),
        _general("g/0"),
    ]
    datasets = split_into_datasets(pairs)
    assert set(datasets) == set(DATASET_IDS)
    assert [p.pair_id for p in datasets[DATASET_NER]] == ["a/ner"]
    assert [p.pair_id for p in datasets["nel_foodon"]] == ["a/nel/foodon"]


def test_dedupe_by_instruction():
    a = _pair("a", instruction="same words")
    b = _pair("b", instruction="same words")
    c = _pair("c", instruction="different words")
    unique, dropped = dedupe_by_instruction([a, b, c])
    assert [p.pair_id for p in unique] == ["a", "c"]
    assert dropped == 1


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000), k=st.integers(min_value=2, max_value=7))
def test_folds_partition_each_dataset(seed, k):
    datasets = random_datasets(random.Random(seed))
    plan = plan_folds(datasets, k=k, rng_seed=seed)
    manifests = [materialize_fold(plan, i) for i in range(k)]

    for ds, pairs in datasets.items():
        all_ids = {p.pair_id for p in pairs}
        test_sets = [
            {r.instance_id for r in m.test if r.dataset_id == ds} for m in manifests
        ]
        # pairwise disjoint
        for i in range(k):
            for j in range(i + 1, k):
                assert not (test_sets[i] & test_sets[j])
        # jointly cover the dataset
        assert set().union(*test_sets) == all_ids
        # balanced within one instance
        sizes = sorted(len(s) for s in test_sets)
        assert sizes[-1] - sizes[0] <= 1
        # train is exactly the complement
        for m, tset in zip(manifests, test_sets):
            train_ids = {r.instance_id for r in m.train if r.dataset_id == ds}
            assert train_ids == all_ids - tset


def test_plan_is_deterministic():
    datasets = random_datasets(random.Random(1))
    a = plan_folds(datasets, rng_seed=42)
    b = plan_folds(datasets, rng_seed=42)
    assert a.assignments == b.assignments
    c = plan_folds(datasets, rng_seed=43)
    assert a.assignments != c.assignments


def test_materialize_shuffles_train_deterministically():
    datasets = random_datasets(random.Random(2))
    plan = plan_folds(datasets, rng_seed=7)
    a = materialize_fold(plan, 0)
    b = materialize_fold(plan, 0)
    assert [r.instance_id for r in a.train] == [r.instance_id for r in b.train]


def test_general_instances_respect_budget_and_target():
    datasets = random_datasets(random.Random(3))
    plan = plan_folds(datasets, rng_seed=0)
    general = [_general(f"g/{i}", instruction_len=30) for i in range(10)]
    general += [_general(f"big/{i}", instruction_len=9000) for i in range(5)]
    manifest = materialize_fold(
        plan, 0, general=general, token_budget=64, general_target=8
    )
    assert manifest.general_count == 8
    chosen = [r for r in manifest.train if r.dataset_id == "general"]
    assert len(chosen) == 8
    assert all(r.instance_id.startswith("g/") for r in chosen)


def test_general_shortfall_noted():
    datasets = random_datasets(random.Random(4))
    plan = plan_folds(datasets, rng_seed=0)
    general = [_general(f"g/{i}") for i in range(3)]
    manifest = materialize_fold(plan, 0, general=general, general_target=10)
    assert manifest.general_count == 3
    assert any("shortfall" in note for note in manifest.notes)


def test_oversized_general_instances_are_excluded():
    datasets = random_datasets(random.Random(5))
    plan = plan_folds(datasets, rng_seed=0)
    general = [_general("g/0", instruction_len=10_000)]
    manifest = materialize_fold(plan, 0, general=general, token_budget=1024)
    assert manifest.general_count == 0


def test_verify_no_leakage_clean_plan():
    datasets = random_datasets(random.Random(6))
    plan = plan_folds(datasets, rng_seed=0)
    for i in range(plan.k):
        assert verify_no_leakage(materialize_fold(plan, i)) == []


def test_verify_no_leakage_detects_shared_instruction():
    shared = "identical instruction text"
    datasets = {
        "nel_foodon": [
            _pair(f"nel_foodon/{i}", Ontology.FOODON, instruction=shared if i < 2 else None)
            for i in range(6)
        ],
        DATASET_NER: [_pair(f"{DATASET_NER}/{i}") for i in range(6)],
    }
    plan = plan_folds(datasets, k=2, rng_seed=0)
    leaks = [verify_no_leakage(materialize_fold(plan, i)) for i in range(2)]
    assert any(shared in found for found in leaks)


def test_dedupe_then_plan_has_no_leaks():
    shared = "identical instruction text"
    pairs = [
        _pair(f"nel_foodon/{i}", Ontology.FOODON, instruction=shared if i < 2 else None)
        for i in range(8)
    ] + [_pair(f"{DATASET_NER}/{i}") for i in range(8)]
    unique, dropped = dedupe_by_instruction(pairs)
    assert dropped == 1
    plan = plan_folds(split_into_datasets(unique), k=2, rng_seed=0)
    for i in range(2):
        assert verify_no_leakage(materialize_fold(plan, i)) == []


def test_plan_rejects_small_k():
    with pytest.raises(ConfigError):
        plan_folds(random_datasets(random.Random(0)), k=1)


def test_plan_rejects_empty_dataset():
    with pytest.raises(EmptyDataset, match="nel_foodon"):
        plan_folds({"nel_foodon": []})


def test_materialize_rejects_bad_index():
    plan = plan_folds(random_datasets(random.Random(0)), k=3)
    with pytest.raises(ConfigError):
        materialize_fold(plan, 3)


def test_plan_save_load_roundtrip(tmp_path):
    datasets = random_datasets(random.Random(8))
    plan = plan_folds(datasets, k=4, rng_seed=17)
    path = tmp_path / "plan.jsonl"
    save_plan(plan, path)
    assert path.exists()
    meta = json.loads(path.with_suffix(path.suffix + ".meta.json").read_text())
    assert meta == {"k": 4, "rng_seed": 17}
    loaded = load_plan(path, datasets=datasets)
    assert loaded.k == 4
    assert loaded.rng_seed == 17
    assert loaded.assignments == plan.assignments
    assert loaded.instructions == plan.instructions


def test_plan_load_without_meta_infers_k(tmp_path, caplog):
    datasets = random_datasets(random.Random(9))
    plan = plan_folds(datasets, k=3, rng_seed=5)
    path = tmp_path / "plan.jsonl"
    save_plan(plan, path)
    path.with_suffix(path.suffix + ".meta.json").unlink()
    with caplog.at_level(logging.WARNING):
        loaded = load_plan(path)
    assert loaded.k == 3
    assert any("meta" in rec.getMessage() for rec in caplog.records)


def test_export_fold_writes_artifacts(tmp_path):
    datasets = random_datasets(random.Random(10), min_size=6, max_size=10)
    plan = plan_folds(datasets, rng_seed=0)
    manifest = materialize_fold(plan, 0)
    pairs_by_id = {p.pair_id: p for pairs in datasets.values() for p in pairs}
    counts = export_fold(manifest, pairs_by_id, tmp_path / "fold_0")
    train = (tmp_path / "fold_0" / "train.jsonl").read_text().splitlines()
    test = (tmp_path / "fold_0" / "test.jsonl").read_text().splitlines()
    flat = (tmp_path / "fold_0" / "train.txt").read_text().splitlines()
    assert counts == {"train": len(train), "test": len(test)}
    assert len(flat) == len(train)
    first = json.loads(train[0])
    assert flat[0] == flat_text(pairs_by_id[first["pair_id"]])
    assert len(train) + len(test) == len(pairs_by_id)
