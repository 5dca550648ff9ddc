"""Ontology entity references: canonical form, URI parsing, and rendering.

An :class:`EntityRef` is the currency the whole toolkit trades in.  Identity
is the triple (ontology, namespace, local_id); the optional Hansard label is
display-only and excluded from equality and hashing.

Accepted surface forms (all parseable back to the same canonical ref):

* ``FOODON-03301889`` / ``FOODON_03301889``
* ``http://purl.obolibrary.org/obo/FOODON_03301889``
* ``NCBITaxon-4006`` and its OBO URI (taxon ids live inside the FoodOn tag set)
* ``SNOMEDCT-226849005`` / ``SNOMEDCT_226849005`` /
  ``http://purl.bioontology.org/ontology/SNOMEDCT/226849005``
* ``AG.01.e.02 [Cheese]`` / ``AG.01.e.02`` (Hansard "Food and Drink" codes)
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import UnrecognizedRef


class Ontology(str, Enum):
    FOODON = "foodon"
    SNOMEDCT = "snomed"
    HANSARD = "hansard"


class UriMode(str, Enum):
    SHORT = "short"
    FULL = "full"


OBO_PREFIX = "http://purl.obolibrary.org/obo/"

#: Namespaces considered in-ontology when filtering parsed predictions.
#: The first entry is the primary namespace of the tag set.
ACCEPTED_NAMESPACES = {
    Ontology.FOODON: ("FOODON", "NCBITaxon"),
    Ontology.SNOMEDCT: ("SNOMEDCT",),
    Ontology.HANSARD: ("AG",),
}

_ONTOLOGY_OF_NAMESPACE = {
    "FOODON": Ontology.FOODON,
    "NCBITaxon": Ontology.FOODON,
    "SNOMEDCT": Ontology.SNOMEDCT,
    "AG": Ontology.HANSARD,
}


@dataclass(frozen=True)
class EntityRef:
    """Canonical identifier of one ontology entity.

    Attributes:
        ontology: Which tag set the entity belongs to.
        namespace: Identifier namespace within the tag set (e.g. taxon ids
            carry namespace "NCBITaxon" inside the FoodOn tag set).
        local_id: Entity identifier within the namespace, kept verbatim
            (leading zeros matter).
        label: Optional human-readable label (Hansard bracketed labels);
            never part of equality.
    """

    ontology: Ontology
    namespace: str
    local_id: str
    label: Optional[str] = field(default=None, compare=False)

    def to_record(self) -> dict:
        return {
            "ontology": self.ontology.value,
            "namespace": self.namespace,
            "local_id": self.local_id,
            "label": self.label,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "EntityRef":
        return cls(
            ontology=Ontology(rec["ontology"]),
            namespace=rec["namespace"],
            local_id=rec["local_id"],
            label=rec.get("label"),
        )


_OBO_RE = re.compile(
    r"(?:https?://purl\.obolibrary\.org/obo/)?"
    r"(?P<ns>FOODON|NCBITaxon)[-_](?P<id>[A-Za-z0-9]+)",
    re.IGNORECASE,
)
_SNOMED_RE = re.compile(
    r"(?:https?://\S*?[/#])?SNOMEDCT[-_/:](?P<id>\d+)",
    re.IGNORECASE,
)
_HANSARD_RE = re.compile(
    r"(?P<code>AG(?:\.[A-Za-z0-9]+)*)\s*(?:\[(?P<label>[^\[\]]*)\])?",
)

_CANONICAL_NS = {"foodon": "FOODON", "ncbitaxon": "NCBITaxon"}


def parse_entity_ref(token: str) -> EntityRef:
    """Parse a rendered entity reference back to its canonical form.

    Tolerates surrounding whitespace, dash/underscore separators, full URIs,
    trailing periods, and an optional Hansard bracketed label.  Raises
    :class:`UnrecognizedRef` for anything that matches no known pattern.
    """
    tok = token.strip()
    tok = tok.rstrip(".").strip()
    if not tok:
        raise UnrecognizedRef("empty reference token")

    m = _OBO_RE.fullmatch(tok)
    if m:
        ns = _CANONICAL_NS[m.group("ns").lower()]
        return EntityRef(Ontology.FOODON, ns, m.group("id"))

    m = _SNOMED_RE.fullmatch(tok)
    if m:
        return EntityRef(Ontology.SNOMEDCT, "SNOMEDCT", m.group("id"))

    m = _HANSARD_RE.fullmatch(tok)
    if m:
        label = (m.group("label") or "").strip() or None
        return EntityRef(Ontology.HANSARD, "AG", m.group("code"), label)

    raise UnrecognizedRef(f"unrecognized entity reference: {token!r}")


def render_entity_ref(ref: EntityRef, uri_mode: UriMode = UriMode.SHORT) -> str:
    """Render a reference as text.

    Short mode gives ``NAMESPACE-id`` (Hansard: ``CODE [Label]``); full mode
    expands OBO namespaces to their purl URIs while Hansard and SNOMED-CT keep
    the short form (they have no conventional URI rendering in responses).
    """
    if ref.namespace in ("FOODON", "NCBITaxon"):
        if uri_mode is UriMode.FULL:
            return f"{OBO_PREFIX}{ref.namespace}_{ref.local_id}"
        return f"{ref.namespace}-{ref.local_id}"
    if ref.namespace == "SNOMEDCT":
        return f"SNOMEDCT-{ref.local_id}"
    if ref.namespace == "AG":
        if ref.label:
            return f"{ref.local_id} [{ref.label}]"
        return ref.local_id
    # Unknown namespaces ("OTHER") keep whatever was stored verbatim.
    return ref.local_id


def canonicalize_semantic_tag(tag: str, declared: Ontology) -> tuple[EntityRef, Optional[str]]:
    """Canonicalize one semantic-tag URI from a corpus annotation.

    Unlike :func:`parse_entity_ref`, this never fails: unknown prefixes are
    preserved under namespace "OTHER" and flagged.  Returns the ref plus an
    optional validation note (cross-namespace ids and unknown prefixes are
    kept, not rejected).
    """
    try:
        ref = parse_entity_ref(tag)
    except UnrecognizedRef:
        return (
            EntityRef(declared, "OTHER", tag.strip()),
            f"unknown URI prefix kept under namespace OTHER: {tag.strip()!r}",
        )
    note = None
    if ref.ontology is not declared:
        note = (
            f"tag namespace {ref.namespace} belongs to {ref.ontology.value} "
            f"but appears in a {declared.value} document"
        )
    return ref, note
