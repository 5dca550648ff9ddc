"""IR sequence construction: golden structure, invariants, round trips."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from foodsem.bioc import group_ontology_variants, parse_bioc_collection, SourceKind
from foodsem.irpairs import (
    NEL_ORDER,
    IRPair,
    NelGold,
    PairSource,
    TaskKind,
    build_ir_sequence,
    flat_text,
    pair_from_record,
    pair_to_record,
    sequences_to_records,
)
from foodsem.refs import EntityRef, Ontology, UriMode
from foodsem.util import normalize_mention

GOLDEN_NER_MENTIONS = (
    "cream cheese",
    "beef",
    "olives",
    "onion",
    "Worcestershire sauce",
    "walnuts",
    "cheese ball",
)


@pytest.fixture(scope="module")
def golden_sequence(golden_bundle, pools):
    return build_ir_sequence(golden_bundle, pools, rng_seed=0)


def test_sequence_shape(golden_sequence):
    tasks = [(p.task, p.ontology) for p in golden_sequence.pairs]
    assert tasks == [
        (TaskKind.NER, None),
        (TaskKind.NEL, Ontology.HANSARD),
        (TaskKind.NEL, Ontology.FOODON),
        (TaskKind.NEL, Ontology.SNOMEDCT),
    ]
    assert [p.ontology for p in golden_sequence.pairs[1:]] == list(NEL_ORDER)


def test_ner_gold_mentions_in_document_order(golden_sequence):
    ner = golden_sequence.pairs[0]
    assert ner.gold == GOLDEN_NER_MENTIONS
    assert ner.pair_id == "0recipe1006/ner"
    assert ner.source is PairSource.CAFETERIA


def test_ner_instruction_embeds_document_text(golden_sequence):
    ner = golden_sequence.pairs[0]
    assert "Mix the cream cheese, beef, olives" in ner.instruction
    assert "until needed." in ner.instruction
    assert "\n" not in ner.instruction


def test_ner_response_lists_mentions(golden_sequence):
    ner = golden_sequence.pairs[0]
    assert ner.response.endswith(", ".join(GOLDEN_NER_MENTIONS) + ".")
    opener = ner.response[: -len(", ".join(GOLDEN_NER_MENTIONS) + ".")].strip()
    assert opener.endswith(":")


def _nel(seq, ontology):
    return next(p for p in seq.pairs if p.ontology is ontology)


def test_foodon_gold_entries(golden_sequence):
    gold = {g.mention: {r.local_id for r in g.refs} for g in _nel(golden_sequence, Ontology.FOODON).gold}
    assert gold == {
        "cream cheese": {"03301889", "00001013"},
        "onion": {"03301704", "4679"},
        "worcestershire sauce": {"03305003", "03311146"},
        "walnuts": {"16718"},
        "cheese ball": {"00001013"},
    }


def test_hansard_gold_keeps_labels(golden_sequence):
    gold = _nel(golden_sequence, Ontology.HANSARD).gold
    cream = next(g for g in gold if g.mention == "cream cheese")
    assert [(r.local_id, r.label) for r in cream.refs] == [
        ("AG.01.e", "Dairy produce"),
        ("AG.01.e.02", "Cheese"),
        ("AG.01.n", "Dishes and prepared food"),
        ("AG.01.n.18", "Preserve"),
    ]


def test_snomed_gold_collapses_cheese_into_cheese_ball(golden_sequence):
    gold = {g.mention: {r.local_id for r in g.refs} for g in _nel(golden_sequence, Ontology.SNOMEDCT).gold}
    assert gold["cheese ball"] == {"102264005"}
    assert "cheese" not in gold


def test_nel_mentions_subset_of_ner(golden_sequence):
    ner_keys = {normalize_mention(m) for m in golden_sequence.pairs[0].gold}
    for pair in golden_sequence.pairs[1:]:
        assert {g.mention for g in pair.gold} <= ner_keys


def test_nel_instruction_embeds_its_mentions(golden_sequence):
    for pair in golden_sequence.pairs[1:]:
        listed = ", ".join(g.mention for g in pair.gold)
        assert listed in pair.instruction


def test_nel_response_renders_each_entry(golden_sequence):
    foodon = _nel(golden_sequence, Ontology.FOODON)
    assert "cream cheese - FOODON-03301889; FOODON-00001013" in foodon.response
    assert foodon.response.endswith(".")
    hansard = _nel(golden_sequence, Ontology.HANSARD)
    assert "beef - AG.01.d.03 [Beef]" in hansard.response


def test_full_uri_mode_expands_obo_refs(golden_bundle, pools):
    seq = build_ir_sequence(golden_bundle, pools, uri_mode=UriMode.FULL, rng_seed=0)
    foodon = _nel(seq, Ontology.FOODON)
    assert "http://purl.obolibrary.org/obo/FOODON_03301889" in foodon.response
    assert "FOODON-03301889" not in foodon.response
    snomed = _nel(seq, Ontology.SNOMEDCT)
    assert "SNOMEDCT-226849005" in snomed.response
    hansard = _nel(seq, Ontology.HANSARD)
    assert "AG.01.d.03 [Beef]" in hansard.response


def test_same_seed_reproduces_sequence(golden_bundle, pools, golden_sequence):
    again = build_ir_sequence(golden_bundle, pools, rng_seed=0)
    assert [pair_to_record(p) for p in again.pairs] == [
        pair_to_record(p) for p in golden_sequence.pairs
    ]


def test_different_seeds_vary_phrasing(golden_bundle, pools, golden_sequence):
    variants = {
        build_ir_sequence(golden_bundle, pools, rng_seed=s).pairs[0].instruction
        for s in range(6)
    }
    assert len(variants) > 1


def test_flat_text_is_single_line(golden_sequence):
    for pair in golden_sequence.pairs:
        line = flat_text(pair)
        assert line.startswith("[INST] ")
        assert " [/INST] " in line
        assert "\n" not in line


def test_pair_record_roundtrip(golden_sequence):
    for pair in golden_sequence.pairs:
        back = pair_from_record(pair_to_record(pair))
        assert back == pair


def test_sequences_to_records_share_index(golden_bundle, toy_bundles, pools):
    seqs = [build_ir_sequence(b, pools) for b in toy_bundles[:3]]
    records = sequences_to_records(seqs)
    by_index = {}
    for rec in records:
        by_index.setdefault(rec["sequence_index"], []).append(rec["source_id"])
    assert sorted(by_index) == [0, 1, 2]
    for sources in by_index.values():
        assert len(set(sources)) == 1


def test_union_gold_when_same_mention_annotated_twice():
    xml = (
        b"<collection><document><id>d1</id>"
        b'<infon key="full_text">warm rice bowl</infon>'
        b'<annotation id="1"><infon key="semantic_tags">FOODON-100</infon>'
        b'<location offset="0" length="4"/><text>RICE</text></annotation>'
        b'<annotation id="2"><infon key="semantic_tags">FOODON-200;FOODON-100</infon>'
        b'<location offset="0" length="4"/><text>RICE</text></annotation>'
        b"</document></collection>"
    )
    docs = parse_bioc_collection(xml, SourceKind.RECIPE, Ontology.FOODON)
    bundle = group_ontology_variants(docs)[0]
    seq = build_ir_sequence(bundle, load_default_pools())
    gold = _nel(seq, Ontology.FOODON).gold
    assert len(gold) == 1
    assert {r.local_id for r in gold[0].refs} == {"100", "200"}


def test_unanchored_mention_appended_to_ner_gold():
    xml = (
        b"<collection><document><id>d2</id>"
        b'<infon key="full_text">plain rice</infon>'
        b'<annotation id="1"><infon key="semantic_tags">FOODON-100</infon>'
        b'<location offset="0" length="4"/><text>RICE</text></annotation>'
        b'<annotation id="2"><infon key="semantic_tags">FOODON-300</infon>'
        b'<location offset="0" length="5"/><text>MANGO</text></annotation>'
        b"</document></collection>"
    )
    docs = parse_bioc_collection(xml, SourceKind.RECIPE, Ontology.FOODON)
    bundle = group_ontology_variants(docs)[0]
    seq = build_ir_sequence(bundle, load_default_pools())
    ner_gold = seq.pairs[0].gold
    assert ner_gold[0] == "rice"
    assert normalize_mention(ner_gold[-1]) == "mango"
    nel_gold = {g.mention for g in _nel(seq, Ontology.FOODON).gold}
    assert nel_gold == {"rice", "mango"}


def load_default_pools():
    from foodsem.pools import load_phrase_pools

    return load_phrase_pools()


_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00"),
    min_size=1,
    max_size=60,
)


@given(
    instruction=_text,
    response=_text,
    mentions=st.lists(_text, min_size=0, max_size=4),
)
def test_record_roundtrip_arbitrary_ner(instruction, response, mentions):
    pair = IRPair(
        pair_id="x/ner",
        task=TaskKind.NER,
        instruction=instruction,
        response=response,
        gold=tuple(mentions),
        source=PairSource.CAFETERIA,
        source_id="x",
    )
    assert pair_from_record(pair_to_record(pair)) == pair


@given(
    n_entries=st.integers(min_value=0, max_value=4),
    ontology=st.sampled_from(list(Ontology)),
)
def test_record_roundtrip_arbitrary_nel(n_entries, ontology):
    namespace = {"foodon": "FOODON", "snomed": "SNOMEDCT", "hansard": "AG"}[ontology.value]
    gold = tuple(
        NelGold(
            f"mention {i}",
            (EntityRef(ontology, namespace, f"AG.0{i}" if namespace == "AG" else str(100 + i)),),
        )
        for i in range(n_entries)
    )
    pair = IRPair(
        pair_id="y/nel",
        task=TaskKind.NEL,
        ontology=ontology,
        instruction="link things",
        response="ok: things.",
        gold=gold,
        source=PairSource.ARTIFICIAL,
        source_id="y",
    )
    assert pair_from_record(pair_to_record(pair)) == pair
