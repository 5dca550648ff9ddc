"""BioC corpus ingestion.

Parses the BioC XML dialect used by the annotated food corpora: each
``<document>`` carries a ``full_text`` infon, an optional ``category`` infon,
and a flat list of ``<annotation>`` elements whose ``semantic_tags`` infon
holds semicolon-separated entity URIs.

Declared annotation offsets in these files are token indices, not character
offsets, so :func:`resolve_spans` re-locates every annotation in the document
text via whitespace-insensitive, case-insensitive search with word-boundary
checks, claiming occurrences left to right so repeated mentions resolve to
distinct spans.
"""

from __future__ import annotations

import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from .errors import (
    DuplicateVariant,
    EmptySemanticTags,
    MalformedXml,
    MissingFullText,
    VariantTextMismatch,
)
from .refs import EntityRef, Ontology, canonicalize_semantic_tag
from .util import collapse_ws, normalize_mention

log = logging.getLogger(__name__)


class SourceKind(str, Enum):
    RECIPE = "recipe"
    ABSTRACT = "abstract"


@dataclass
class Annotation:
    """One annotated mention: surface text, declared location, entity refs."""

    id: str
    text: str
    declared_offset: int
    declared_length: int
    entity_refs: list[EntityRef]
    resolved_span: Optional[tuple[int, int]] = None

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "declared_offset": self.declared_offset,
            "declared_length": self.declared_length,
            "resolved_span": list(self.resolved_span) if self.resolved_span else None,
            "entity_refs": [r.to_record() for r in self.entity_refs],
        }


@dataclass
class BiocDocument:
    doc_id: str
    source_kind: SourceKind
    ontology: Ontology
    full_text: str
    category: Optional[str] = None
    annotations: list[Annotation] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    spans_resolved: bool = False

    def to_record(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "source_kind": self.source_kind.value,
            "ontology": self.ontology.value,
            "category": self.category,
            "full_text": self.full_text,
            "annotations": [a.to_record() for a in self.annotations],
        }


@dataclass
class DocumentBundle:
    """All ontology variants of one document, grouped by shared id and text."""

    doc_id: str
    source_kind: SourceKind
    full_text: str
    category: Optional[str]
    variants: dict[Ontology, BiocDocument]


def _direct_infons(elem: ET.Element) -> dict[str, str]:
    out = {}
    for child in elem:
        if child.tag == "infon" and "key" in child.attrib:
            out[child.attrib["key"]] = child.text or ""
    return out


def parse_bioc_collection(
    xml_bytes: bytes, source_kind: SourceKind, ontology: Ontology
) -> list[BiocDocument]:
    """Parse one BioC collection file into documents (spans unresolved).

    Raises :class:`MalformedXml` (naming the document and annotation where
    possible), :class:`MissingFullText`, or :class:`EmptySemanticTags`.
    """
    try:
        root = ET.fromstring(xml_bytes)
    except ET.ParseError as exc:
        raise MalformedXml(f"not well-formed XML: {exc}") from exc

    docs = []
    for doc_elem in root.iter("document"):
        id_elem = doc_elem.find("id")
        if id_elem is None or not (id_elem.text or "").strip():
            raise MalformedXml("document without an <id> element")
        doc_id = id_elem.text.strip()

        infons = _direct_infons(doc_elem)
        if "full_text" not in infons or not infons["full_text"]:
            raise MissingFullText(f"document {doc_id}: no full_text infon")

        doc = BiocDocument(
            doc_id=doc_id,
            source_kind=source_kind,
            ontology=ontology,
            full_text=infons["full_text"],
            category=infons.get("category"),
        )

        for ann_elem in doc_elem.findall("annotation"):
            ann_id = ann_elem.attrib.get("id")
            if not ann_id:
                raise MalformedXml(f"document {doc_id}: annotation without an id attribute")
            text_elem = ann_elem.find("text")
            if text_elem is None or not (text_elem.text or "").strip():
                raise MalformedXml(f"document {doc_id}, annotation {ann_id}: no <text>")
            loc_elem = ann_elem.find("location")
            if loc_elem is None:
                raise MalformedXml(f"document {doc_id}, annotation {ann_id}: no <location>")
            try:
                offset = int(loc_elem.attrib["offset"])
                length = int(loc_elem.attrib["length"])
            except (KeyError, ValueError) as exc:
                raise MalformedXml(
                    f"document {doc_id}, annotation {ann_id}: bad location attributes"
                ) from exc

            ann_infons = _direct_infons(ann_elem)
            tags = [t.strip() for t in ann_infons.get("semantic_tags", "").split(";") if t.strip()]
            if not tags:
                raise EmptySemanticTags(
                    f"document {doc_id}, annotation {ann_id}: no semantic tags"
                )

            refs = []
            for tag in tags:
                ref, note = canonicalize_semantic_tag(tag, ontology)
                refs.append(ref)
                if note:
                    doc.notes.append(f"annotation {ann_id}: {note}")

            doc.annotations.append(
                Annotation(
                    id=ann_id,
                    text=text_elem.text.strip(),
                    declared_offset=offset,
                    declared_length=length,
                    entity_refs=refs,
                )
            )

        docs.append(doc)
    return docs


def _normalized_index(text: str) -> tuple[str, list[int]]:
    """Collapse whitespace for searching, keeping a map back to original offsets."""
    chars: list[str] = []
    posmap: list[int] = []
    pending_space = False
    for i, ch in enumerate(text):
        if ch.isspace():
            pending_space = bool(chars)
            continue
        if pending_space:
            chars.append(" ")
            posmap.append(i)  # position of the first char after the gap
            pending_space = False
        chars.append(ch.lower())
        posmap.append(i)
    return "".join(chars), posmap


def _find_occurrences(haystack: str, needle: str) -> list[int]:
    """Word-bounded occurrences of needle in haystack (both pre-normalized)."""
    hits = []
    start = 0
    while True:
        i = haystack.find(needle, start)
        if i < 0:
            break
        before_ok = i == 0 or not haystack[i - 1].isalnum()
        j = i + len(needle)
        after_ok = j == len(haystack) or not haystack[j].isalnum()
        if before_ok and after_ok:
            hits.append(i)
        start = i + 1
    return hits


def resolve_spans(doc: BiocDocument) -> tuple[BiocDocument, list[str]]:
    """Locate every annotation's character span inside the document text.

    Processes annotations in file order; each takes its leftmost occurrence
    that does not overlap a span already claimed by an earlier annotation.
    Returns the document (spans filled in) and the validation notes produced
    by this pass; the same notes are also appended to ``doc.notes``.
    Idempotent: a second call returns immediately with no new notes.
    """
    if doc.spans_resolved:
        return doc, []
    doc.spans_resolved = True
    norm, posmap = _normalized_index(doc.full_text)
    notes: list[str] = []
    claimed: list[tuple[int, int]] = []

    for ann in doc.annotations:
        needle = normalize_mention(ann.text)
        if ann.declared_length != len(needle):
            notes.append(
                f"annotation {ann.id}: declared length {ann.declared_length} "
                f"differs from mention text length {len(needle)}"
            )
        occurrences = _find_occurrences(norm, needle)
        if not occurrences:
            ann.resolved_span = None
            notes.append(f"annotation {ann.id}: text {ann.text!r} not found in document text")
            continue

        chosen = None
        for i in occurrences:
            span = (posmap[i], posmap[i + len(needle) - 1] + 1)
            if not any(span[0] < cend and cstart < span[1] for cstart, cend in claimed):
                chosen = span
                break
        if chosen is None:
            i = occurrences[0]
            chosen = (posmap[i], posmap[i + len(needle) - 1] + 1)
            notes.append(
                f"annotation {ann.id}: all occurrences of {ann.text!r} already "
                f"claimed; sharing the first span"
            )
        ann.resolved_span = chosen
        claimed.append(chosen)

    doc.notes.extend(notes)
    return doc, notes


def discover_corpus_files(corpus_dir) -> list[tuple[Path, SourceKind, Ontology]]:
    """Find corpus XML files and classify them by filename tokens.

    A file participates when its name contains an ontology token (foodon,
    snomed, or hansard) and a source token (recipe or abstract), e.g.
    ``recipes_foodon.xml``.  Other XML files are skipped with a log message.
    """
    root = Path(corpus_dir)
    if not root.is_dir():
        raise NotADirectoryError(f"corpus directory not found: {root}")
    out = []
    for path in sorted(root.glob("*.xml")):
        name = path.name.lower()
        ontology = next(
            (o for o in (Ontology.FOODON, Ontology.SNOMEDCT, Ontology.HANSARD)
             if o.value in name),
            None,
        )
        kind = next((k for k in SourceKind if k.value in name), None)
        if ontology is None or kind is None:
            log.info("skipping %s: filename lacks ontology or source token", path.name)
            continue
        out.append((path, kind, ontology))
    return out


def load_corpus(corpus_dir, resolve: bool = True) -> list[BiocDocument]:
    """Parse every discovered corpus file, optionally resolving spans."""
    docs: list[BiocDocument] = []
    for path, kind, ontology in discover_corpus_files(corpus_dir):
        docs.extend(parse_bioc_collection(path.read_bytes(), kind, ontology))
    if resolve:
        for doc in docs:
            resolve_spans(doc)
    return docs


def group_ontology_variants(docs: list[BiocDocument]) -> list[DocumentBundle]:
    """Group per-ontology documents that describe the same source text.

    Raises :class:`DuplicateVariant` when one (doc_id, ontology) appears twice
    and :class:`VariantTextMismatch` when variants disagree on the text
    (compared whitespace-insensitively).  Bundle order follows first
    appearance in the input.
    """
    bundles: dict[str, DocumentBundle] = {}
    for doc in docs:
        bundle = bundles.get(doc.doc_id)
        if bundle is None:
            bundles[doc.doc_id] = DocumentBundle(
                doc_id=doc.doc_id,
                source_kind=doc.source_kind,
                full_text=doc.full_text,
                category=doc.category,
                variants={doc.ontology: doc},
            )
            continue
        if doc.ontology in bundle.variants:
            raise DuplicateVariant(
                f"document {doc.doc_id}: two {doc.ontology.value} variants"
            )
        if collapse_ws(doc.full_text) != collapse_ws(bundle.full_text):
            raise VariantTextMismatch(
                f"document {doc.doc_id}: {doc.ontology.value} variant text differs"
            )
        bundle.variants[doc.ontology] = doc
        if bundle.category is None:
            bundle.category = doc.category
    return list(bundles.values())
