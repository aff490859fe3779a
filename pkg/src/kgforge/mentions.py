"""Typed entity mentions, entity linking and Victim/Aggressor role assignment."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

from .corpus import Document
from .gazetteers import GazetteerSet, RoleRuleSet

ETYPES = ("Actor", "Date", "Location", "IncidentType")
ROLES = ("Victim", "Aggressor")

_MODIFIER_POS = {"DT", "JJ", "CD", "PRP$", "NN", "NNP"}
_PUNCT_POS = {",", ".", ":", "''", "``", "-LRB-", "-RRB-", "SYM"}


@dataclass(frozen=True)
class Mention:
    mention_id: str
    doc_id: str
    sentence_index: int
    token_start: int
    token_end: int
    etype: str
    surface: str
    role: str | None = None
    entity_id: str = ""
    head: str = ""
    char_start: int = 0
    char_end: int = 0

    def __post_init__(self):
        if self.etype not in ETYPES:
            raise ValueError(f"unknown mention type {self.etype!r}")
        if self.role is not None and (self.etype != "Actor" or self.role not in ROLES):
            raise ValueError(f"role {self.role!r} not allowed on {self.etype} mention")
        if not 0 <= self.token_start < self.token_end:
            raise ValueError(f"invalid token range [{self.token_start}, {self.token_end})")

    def overlaps(self, other: "Mention") -> bool:
        return (
            self.doc_id == other.doc_id
            and self.sentence_index == other.sentence_index
            and self.token_start < other.token_end
            and other.token_start < self.token_end
        )

    def to_dict(self) -> dict:
        return {
            "mention_id": self.mention_id,
            "doc_id": self.doc_id,
            "sentence_index": self.sentence_index,
            "token_start": self.token_start,
            "token_end": self.token_end,
            "etype": self.etype,
            "surface": self.surface,
            "role": self.role,
            "entity_id": self.entity_id,
            "head": self.head,
            "char_start": self.char_start,
            "char_end": self.char_end,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Mention":
        return cls(**d)


class UnannotatedDocumentError(ValueError):
    pass


def _longest_first(spans: list[tuple[int, int, object]]) -> list[tuple[int, int, object]]:
    kept: list[tuple[int, int, object]] = []
    for span in sorted(spans, key=lambda s: (-(s[1] - s[0]), s[0])):
        if all(span[1] <= k[0] or k[1] <= span[0] for k in kept):
            kept.append(span)
    return sorted(kept)


def _runs(tags: list[str], tag: str) -> list[tuple[int, int, object]]:
    out, i = [], 0
    while i < len(tags):
        if tags[i] == tag:
            j = i
            while j < len(tags) and tags[j] == tag:
                j += 1
            out.append((i, j, None))
            i = j
        else:
            i += 1
    return out


def _actor_spans(sent, gazetteers: GazetteerSet, blocked: set[int]) -> list[tuple[int, int, int]]:
    """(start, end, head index) for actor noun phrases in one sentence."""
    lemmas = [t.lemma.lower() for t in sent]
    cores = [(a, b, None) for a, b, _ in gazetteers.actors.find_all(lemmas)]
    cores += _runs([t.ner for t in sent], "ACTOR")
    cores = [c for c in _longest_first(cores) if not any(i in blocked for i in range(c[0], c[1]))]
    in_core = {i for a, b, _ in cores for i in range(a, b)}
    out = []
    for a, b, _ in cores:
        head = b - 1
        start = a
        while (
            start > 0
            and start - 1 not in in_core
            and start - 1 not in blocked
            and sent[start - 1].pos in _MODIFIER_POS
            and sent[start - 1].ner in ("O", "NUMBER", "MISC")
        ):
            start -= 1
        end = b
        while (
            end < len(sent)
            and end not in in_core
            and end not in blocked
            and sent[end].pos == "NNP"
            and sent[end].ner in ("O", "MISC", "PERSON", "ORGANIZATION")
        ):
            end += 1
        out.append((start, end, head))
    return out


def extract_mentions(doc: Document, gazetteers: GazetteerSet) -> list[Mention]:
    if not doc.is_annotated:
        raise UnannotatedDocumentError(f"document {doc.doc_id!r} has no token annotations")
    found: list[tuple[int, int, int, str, str]] = []  # sentence, start, end, etype, head
    for si, sent in enumerate(doc.sentences):
        ner = [t.ner for t in sent]
        surfaces = [t.surface for t in sent]
        lemmas = [t.lemma.lower() for t in sent]
        dates = _runs(ner, "DATE")
        locs = _runs(ner, "LOCATION") + [
            (a, b, None) for a, b, _ in gazetteers.places.find_all(surfaces)
            if all(ner[i] in ("O", "LOCATION") for i in range(a, b))
        ]
        locs = _longest_first(locs)
        blocked = {i for a, b, _ in dates + locs for i in range(a, b)}
        actors = _actor_spans(sent, gazetteers, blocked)
        incidents = _longest_first(gazetteers.incidents.find_all(lemmas))
        for a, b, _ in dates:
            found.append((si, a, b, "Date", " ".join(lemmas[a:b])))
        for a, b, _ in locs:
            found.append((si, a, b, "Location", " ".join(lemmas[a:b])))
        for a, b, h in actors:
            found.append((si, a, b, "Actor", lemmas[h]))
        for a, b, _ in incidents:
            found.append((si, a, b, "IncidentType", " ".join(lemmas[a:b])))
    found.sort(key=lambda f: (f[0], f[1], ETYPES.index(f[3]), f[2]))
    out = []
    for i, (si, a, b, etype, head) in enumerate(found):
        toks = doc.sentences[si][a:b]
        cs, ce = toks[0].char_start, toks[-1].char_end
        out.append(Mention(
            mention_id=f"{doc.doc_id}:m{i}",
            doc_id=doc.doc_id,
            sentence_index=si,
            token_start=a,
            token_end=b,
            etype=etype,
            surface=doc.text[cs:ce],
            head=head,
            char_start=cs,
            char_end=ce,
        ))
    return out


def mention_lemmas(doc: Document, m: Mention) -> list[str]:
    return [t.lemma.lower() for t in doc.sentences[m.sentence_index][m.token_start:m.token_end]]


def canonical_incident(doc: Document, m: Mention, alias_rules: Mapping[str, str]) -> str:
    """Canonical incident type of a mention; unknown phrases canonicalise to themselves."""
    key = " ".join(mention_lemmas(doc, m))
    if key in alias_rules:
        return alias_rules[key]
    # "robbers" -> lemma "robber"; also try the last lemma alone
    last = key.split()[-1] if key else key
    return alias_rules.get(last, key)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def link_entities(doc: Document, mentions: list[Mention], alias_rules: Mapping[str, str] | None = None) -> list[Mention]:
    """Assign entity ids: coref-chain overlap and shared incident aliases are merged."""
    alias_rules = alias_rules or {}
    uf = _UnionFind(len(mentions))
    for chain in doc.coref_chains:
        by_type: dict[str, list[int]] = {}
        for i, m in enumerate(mentions):
            if any(si == m.sentence_index and a < m.token_end and m.token_start < b for si, a, b in chain):
                by_type.setdefault(m.etype, []).append(i)
        for members in by_type.values():
            for j in members[1:]:
                uf.union(members[0], j)
    seen_alias: dict[str, int] = {}
    for i, m in enumerate(mentions):
        if m.etype != "IncidentType":
            continue
        canon = canonical_incident(doc, m, alias_rules)
        if canon in seen_alias:
            uf.union(seen_alias[canon], i)
        else:
            seen_alias[canon] = i
    ids: dict[int, str] = {}
    out = []
    for i, m in enumerate(mentions):
        root = uf.find(i)
        if root not in ids:
            ids[root] = f"{doc.doc_id}:e{len(ids)}"
        out.append(replace(m, entity_id=ids[root]))
    return out


def _is_punct(tok) -> bool:
    return tok.pos in _PUNCT_POS or not any(c.isalnum() for c in tok.surface)


def _positional_role(sent, m: Mention, rules: RoleRuleSet, actor_tokens: set[int]) -> set[str]:
    lemmas = [t.lemma.lower() for t in sent]
    votes = set()
    # act after the mention: "pirates boarded" -> Aggressor, "the vessel was boarded" -> Victim
    seen, passive, j = 0, False, m.token_end
    while j < len(sent) and seen < rules.window:
        tok = sent[j]
        if _is_punct(tok):
            j += 1
            continue
        if tok.pos == "CC" or j in actor_tokens:
            break
        if rules.act_at(lemmas, j):
            votes.add("Victim" if passive else "Aggressor")
            break
        if lemmas[j] == "be":
            passive = True
        seen += 1
        j += 1
    # act before the mention: "kidnapped five crewmen" -> Victim, "boarded by robbers" -> Aggressor
    seen, agent, j = 0, False, m.token_start - 1
    while j >= 0 and seen < rules.window:
        tok = sent[j]
        if _is_punct(tok):
            j -= 1
            continue
        if tok.pos == "CC" or j in actor_tokens:
            break
        hit = next((k for k in range(j, max(-1, j - 3), -1) if k + rules.act_at(lemmas, k) == j + 1
                    and rules.act_at(lemmas, k)), None)
        if hit is not None:
            votes.add("Aggressor" if agent else "Victim")
            break
        if lemmas[j] == "by":
            agent = True
        seen += 1
        j -= 1
    return votes


def assign_roles(doc: Document, mentions: list[Mention], rules: RoleRuleSet) -> list[Mention]:
    """Recompute Actor roles from keywords and adjacent aggressive acts.

    Conflicting evidence on a mention, or disagreement between mentions of one
    entity, leaves the role unset for the whole entity.
    """
    status: dict[int, str | None] = {}
    conflicted: set[int] = set()
    for i, m in enumerate(mentions):
        if m.etype != "Actor":
            continue
        sent = doc.sentences[m.sentence_index]
        others = {
            t for o in mentions
            if o.etype == "Actor" and o.sentence_index == m.sentence_index and o is not m
            for t in range(o.token_start, o.token_end)
        }
        votes = _positional_role(sent, m, rules, others)
        if m.head in rules.aggressor_keywords:
            votes.add("Aggressor")
        elif m.head in rules.victim_keywords:
            votes.add("Victim")
        if len(votes) > 1:
            conflicted.add(i)
            status[i] = None
        else:
            status[i] = next(iter(votes), None)
    by_entity: dict[str, list[int]] = {}
    for i in status:
        by_entity.setdefault(mentions[i].entity_id or mentions[i].mention_id, []).append(i)
    role_of: dict[int, str | None] = {}
    for members in by_entity.values():
        roles = {status[i] for i in members if status[i] is not None}
        if any(i in conflicted for i in members) or len(roles) > 1:
            final = None
        else:
            final = next(iter(roles), None)
        for i in members:
            role_of[i] = final
    return [replace(m, role=role_of[i]) if i in role_of else m for i, m in enumerate(mentions)]
