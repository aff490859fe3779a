"""Probabilistic knowledge graph over an event ontology.

Accepted relation candidates become triples between entities. Span-level
duplicates of one (subject entity, predicate, object entity) collapse into a
single triple that keeps the highest probability and every provenance record.
Each document contributes one Incident node that its triples hang from.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .annotate import lemmatize
from .candidates import RelationCandidate
from .gazetteers import GazetteerSet


@dataclass(frozen=True)
class OntologyClass:
    name: str
    parent: str | None = None


ONTOLOGY: dict[str, OntologyClass] = {
    c.name: c
    for c in (
        OntologyClass("Incident"),
        OntologyClass("Actor"),
        OntologyClass("Location"),
        OntologyClass("Date"),
        *(OntologyClass(n, "Actor") for n in (
            "Individuals", "Organizations", "TransportShips", "PassengerShips",
            "FishingShips", "NavyShips", "OtherShips",
        )),
    )
}

_ETYPE_CLASS = {"Date": "Date", "Location": "Location", "IncidentType": "Incident"}


def ancestors(name: str) -> list[str]:
    """``name`` followed by its superclasses."""
    out, seen = [], set()
    cur: str | None = name
    while cur is not None:
        if cur in seen:
            raise ValueError(f"cycle in ontology at {cur}")
        seen.add(cur)
        out.append(cur)
        cur = ONTOLOGY[cur].parent
    return out


def is_a(name: str, cls: str) -> bool:
    return cls in ancestors(name)


def mention_class(m, gazetteers: GazetteerSet | None) -> str:
    if m.etype != "Actor":
        return _ETYPE_CLASS[m.etype]
    cls = None
    if gazetteers is not None:
        words = m.surface.lower().split()
        lemmas = [lemmatize(w, "NNS" if w.endswith("s") else "NN") for w in words]
        if m.head in lemmas:
            cut = len(lemmas) - 1 - lemmas[::-1].index(m.head)
            cls = gazetteers.actor_class(lemmas[:cut + 1])
        cls = cls or gazetteers.actor_class([m.head])
    if cls is None:
        cls = "Individuals" if m.role == "Aggressor" else "OtherShips"
    return cls


@dataclass(frozen=True)
class Node:
    entity: str
    cls: str
    role: str | None = None

    def to_dict(self, with_role: bool) -> dict:
        d = {"entity": self.entity, "class": self.cls}
        if with_role:
            d["role"] = self.role
        return d


@dataclass
class KGTriple:
    subject: Node
    predicate: str
    object: Node
    probability: float
    provenance: list[dict] = field(default_factory=list)

    @property
    def incident(self) -> str:
        return f"incident:{self.provenance[0]['doc_id']}"

    @property
    def key(self) -> tuple[str, str, str]:
        return self.subject.entity, self.predicate, self.object.entity

    @property
    def candidate_id(self) -> str:
        return min(p["candidate_id"] for p in self.provenance)

    def to_dict(self) -> dict:
        return {
            "subject": self.subject.to_dict(True),
            "predicate": self.predicate,
            "object": self.object.to_dict(False),
            "probability": self.probability,
            "incident": self.incident,
            "provenance": self.provenance,
        }


def _role_of(m, spec_role: str | None) -> str | None:
    if m.etype != "Actor":
        return None
    return spec_role or m.role


def build_graph(
    marginals,
    candidates: Iterable[RelationCandidate],
    mentions=None,
    min_prob: float = 0.5,
    gazetteers: GazetteerSet | None = None,
) -> list[KGTriple]:
    """One triple per accepted candidate, aggregated by entity pair with max probability.

    ``marginals`` is a sequence of Marginal or a mapping candidate id -> probability.
    ``mentions`` optionally refreshes candidate endpoints by mention id.
    """
    if isinstance(marginals, Mapping):
        probs = {k: (float(v), None) for k, v in marginals.items()}
    else:
        probs = {m.candidate_id: (m.probability, m.seed) for m in marginals}
    by_id = {m.mention_id: m for m in mentions} if mentions else {}
    triples: dict[tuple[str, str, str], KGTriple] = {}
    for c in sorted(candidates, key=lambda c: c.candidate_id):
        if c.candidate_id not in probs:
            continue
        p, seed = probs[c.candidate_id]
        if p < min_prob:
            continue
        left = by_id.get(c.left.mention_id, c.left)
        right = by_id.get(c.right.mention_id, c.right)
        rt = c.relation
        subj = Node(left.entity_id or left.mention_id, mention_class(left, gazetteers), _role_of(left, rt.left_spec[1]))
        obj = Node(right.entity_id or right.mention_id, mention_class(right, gazetteers), _role_of(right, rt.right_spec[1]))
        prov = {
            "doc_id": c.doc_id,
            "candidate_id": c.candidate_id,
            "left_span": [left.char_start, left.char_end],
            "right_span": [right.char_start, right.char_end],
            "probability": p,
            "seed": seed,
        }
        key = (subj.entity, c.rtype, obj.entity)
        t = triples.get(key)
        if t is None:
            triples[key] = KGTriple(subj, c.rtype, obj, p, [prov])
        else:
            t.provenance.append(prov)
            if p > t.probability:
                t.probability = p
    return sort_triples(triples.values())


def sort_triples(triples: Iterable[KGTriple]) -> list[KGTriple]:
    return sorted(triples, key=lambda t: (-t.probability, t.candidate_id))


def query(
    graph: Sequence[KGTriple],
    relation: str | None = None,
    cls: str | None = None,
    role: str | None = None,
    min_prob: float | None = None,
    doc_id: str | None = None,
) -> list[KGTriple]:
    """Conjunctive filter; ``cls`` matches either endpoint, including superclasses."""
    out = []
    for t in graph:
        if relation is not None and t.predicate != relation:
            continue
        if cls is not None and not (is_a(t.subject.cls, cls) or is_a(t.object.cls, cls)):
            continue
        if role is not None and t.subject.role != role:
            continue
        if min_prob is not None and t.probability < min_prob:
            continue
        if doc_id is not None and all(p["doc_id"] != doc_id for p in t.provenance):
            continue
        out.append(t)
    return sort_triples(out)


def incidents(graph: Sequence[KGTriple]) -> dict[str, list[KGTriple]]:
    out: dict[str, list[KGTriple]] = {}
    for t in graph:
        out.setdefault(t.incident, []).append(t)
    return out


def save_graph_jsonl(graph: Sequence[KGTriple], path: Path | str, meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write(json.dumps({"_meta": meta}, sort_keys=True) + "\n")
        for t in graph:
            fh.write(json.dumps(t.to_dict(), sort_keys=True) + "\n")


def load_graph_jsonl(path: Path | str) -> list[KGTriple]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            if "_meta" in d:
                continue
            s, o = d["subject"], d["object"]
            out.append(KGTriple(Node(s["entity"], s["class"], s.get("role")), d["predicate"],
                                Node(o["entity"], o["class"]), d["probability"], d["provenance"]))
    return out


def save_graph_tsv(graph: Sequence[KGTriple], path: Path | str, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write("subject\tsubject_class\trole\tpredicate\tobject\tobject_class\tprobability\tincident\n")
        for t in graph:
            fh.write(f"{t.subject.entity}\t{t.subject.cls}\t{t.subject.role or ''}\t{t.predicate}\t"
                     f"{t.object.entity}\t{t.object.cls}\t{t.probability:.6f}\t{t.incident}\n")
