"""Shared fixtures: toy corpus handles, phrase pools, and golden-document helpers."""

import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from foodsem.bioc import group_ontology_variants, load_corpus
from foodsem.pools import default_pool_path, load_phrase_pools

TOY_DIR = default_pool_path().parent / "toy"
GOLDEN_DOC_ID = "0recipe1006"


@pytest.fixture(scope="session")
def toy_corpus_dir() -> Path:
    return TOY_DIR


@pytest.fixture(scope="session")
def toy_documents():
    return load_corpus(TOY_DIR)


@pytest.fixture(scope="session")
def toy_bundles(toy_documents):
    return group_ontology_variants(toy_documents)


@pytest.fixture(scope="session")
def golden_bundle(toy_bundles):
    return next(b for b in toy_bundles if b.doc_id == GOLDEN_DOC_ID)


@pytest.fixture(scope="session")
def pools():
    return load_phrase_pools()


def extract_single_document(src: Path, doc_id: str, dest: Path) -> Path:
    """Copy one <document> out of a corpus file into a fresh single-doc corpus file."""
    root = ET.parse(src).getroot()
    for doc in root.iter("document"):
        id_el = doc.find("id")
        if id_el is not None and (id_el.text or "").strip() == doc_id:
            collection = ET.Element("collection")
            collection.append(doc)
            dest.parent.mkdir(parents=True, exist_ok=True)
            ET.ElementTree(collection).write(dest, encoding="unicode")
            return dest
    raise AssertionError(f"document {doc_id} not found in {src}")


@pytest.fixture()
def golden_only_corpus(tmp_path) -> Path:
    """A corpus directory holding only the golden recipe, FoodOn variant."""
    corpus = tmp_path / "golden_corpus"
    extract_single_document(
        TOY_DIR / "recipes_foodon.xml", GOLDEN_DOC_ID, corpus / "recipes_foodon.xml"
    )
    return corpus
