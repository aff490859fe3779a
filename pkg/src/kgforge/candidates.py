"""Binary relation candidates over co-occurring mention pairs."""
from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import Document
from .mentions import Mention


@dataclass(frozen=True)
class RelationType:
    name: str
    left_spec: tuple[str, str | None]
    right_spec: tuple[str, str | None]

    def slot_ok(self, m: Mention, side: str) -> bool:
        etype, role = self.left_spec if side == "left" else self.right_spec
        if m.etype != etype:
            return False
        # role-unset actors fill either role slot
        return role is None or m.role is None or m.role == role


_V = ("Actor", "Victim")
_A = ("Actor", "Aggressor")
_D = ("Date", None)
_L = ("Location", None)
_I = ("IncidentType", None)

RELATION_TYPES: tuple[RelationType, ...] = (
    RelationType("VictimAggressor", _V, _A),
    RelationType("VictimDate", _V, _D),
    RelationType("VictimIncidentType", _V, _I),
    RelationType("VictimLocation", _V, _L),
    RelationType("IncidentTypeDate", _I, _D),
    RelationType("AggressorIncidentType", _A, _I),
    RelationType("AggressorLocation", _A, _L),
    RelationType("AggressorDate", _A, _D),
)
RELATIONS = {rt.name: rt for rt in RELATION_TYPES}


@dataclass
class RelationCandidate:
    candidate_id: str
    rtype: str
    doc_id: str
    left: Mention
    right: Mention
    features: frozenset[int] = field(default_factory=frozenset)

    @property
    def relation(self) -> RelationType:
        return RELATIONS[self.rtype]

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "rtype": self.rtype,
            "doc_id": self.doc_id,
            "left_mention": self.left.to_dict(),
            "right_mention": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RelationCandidate":
        return cls(
            candidate_id=d["candidate_id"],
            rtype=d["rtype"],
            doc_id=d["doc_id"],
            left=Mention.from_dict(d["left_mention"]),
            right=Mention.from_dict(d["right_mention"]),
        )


def candidate_id(doc_id: str, rtype: str, left: Mention, right: Mention) -> str:
    return f"{doc_id}|{rtype}|{left.mention_id}|{right.mention_id}"


def generate_candidates(doc: Document, mentions: list[Mention], rtype: RelationType | str) -> list[RelationCandidate]:
    rt = RELATIONS[rtype] if isinstance(rtype, str) else rtype
    lefts = [m for m in mentions if m.doc_id == doc.doc_id and rt.slot_ok(m, "left")]
    rights = [m for m in mentions if m.doc_id == doc.doc_id and rt.slot_ok(m, "right")]
    out = []
    for lm in lefts:
        for rm in rights:
            if lm.overlaps(rm) or (lm.entity_id and lm.entity_id == rm.entity_id) or lm is rm:
                continue
            out.append(RelationCandidate(candidate_id(doc.doc_id, rt.name, lm, rm), rt.name, doc.doc_id, lm, rm))
    return out


def generate_all(doc: Document, mentions: list[Mention]) -> list[RelationCandidate]:
    out = []
    for rt in RELATION_TYPES:
        out.extend(generate_candidates(doc, mentions, rt))
    return out
