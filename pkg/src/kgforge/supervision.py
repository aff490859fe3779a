"""Distant supervision: secondary-database matching, heuristic rules, majority vote.

Votes are first computed per entity and slot (victim, aggressor, date,
location, incident) and then propagated to relation candidates: both
endpoints True gives a True relation vote, any endpoint False gives a False
vote. Every vote carries its source name so ablations can filter by source.
"""
from __future__ import annotations

import csv
import datetime as dt
import random
import re
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .annotate import COORD_RE, MONTHS, lemmatize
from .candidates import RELATIONS, RelationCandidate
from .corpus import Document
from .gazetteers import RoleRuleSet
from .mentions import Mention, canonical_incident, mention_lemmas

COORD_TOLERANCE = 0.02
PREFIX_CHARS = 50
DB_FIELDS = ("date", "lat", "lon", "ship_type", "aggressor", "incident_type", "text_prefix")

DB_SOURCE = "db"
RULE_ENTITY = "rules:entity"
RULE_CLOSEST_DATE = "rules:closest_date"
RULE_ACT_BETWEEN = "rules:act_between"
MODES = ("db-only", "rules-only", "both")


@dataclass(frozen=True)
class DBRecord:
    date: dt.date
    lat: float
    lon: float
    ship_type: str
    aggressor: str
    incident_type: str
    text_prefix: str

    def __post_init__(self):
        if not (-90 <= self.lat <= 90 and -180 <= self.lon <= 180):
            raise ValueError(f"coordinates out of range: {self.lat}, {self.lon}")


@dataclass
class SecondaryDB:
    kind: str  # "Maritime" or "Piracy"
    records: list[DBRecord] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("Maritime", "Piracy"):
            raise ValueError(f"unknown secondary database kind {self.kind!r}")
        self._by_day: dict[tuple[int, int], list[DBRecord]] = defaultdict(list)
        for r in self.records:
            self._by_day[(r.date.month, r.date.day)].append(r)

    def on_day(self, month: int, day: int) -> list[DBRecord]:
        return self._by_day.get((month, day), [])

    @classmethod
    def load_csv(cls, path: Path | str, kind: str) -> "SecondaryDB":
        records = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(row for row in fh if not row.startswith("#"))
            missing = set(DB_FIELDS) - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"{path}: missing columns {sorted(missing)}")
            for lineno, row in enumerate(reader, 2):
                try:
                    records.append(DBRecord(
                        date=dt.date.fromisoformat(row["date"]),
                        lat=float(row["lat"]),
                        lon=float(row["lon"]),
                        ship_type=row["ship_type"],
                        aggressor=row["aggressor"],
                        incident_type=row["incident_type"],
                        text_prefix=row["text_prefix"],
                    ))
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from exc
        return cls(kind, records)

    def save_csv(self, path: Path | str, header: str | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(DB_FIELDS)
            for r in self.records:
                w.writerow([r.date.isoformat(), f"{r.lat:.4f}", f"{r.lon:.4f}", r.ship_type,
                            r.aggressor, r.incident_type, r.text_prefix])


@dataclass(frozen=True)
class LabelVote:
    candidate_id: str
    source: str
    polarity: bool

    def to_dict(self) -> dict:
        return {"candidate_id": self.candidate_id, "source": self.source, "polarity": self.polarity}


@dataclass
class LabeledCandidate:
    candidate: RelationCandidate
    votes: list[LabelVote]
    resolved: bool | None  # None = Abstain


# ---------------------------------------------------------------- parsing


def parse_date(text: str) -> tuple[int | None, int | None, int | None]:
    """(year, month, day) from a date mention; missing parts are None."""
    text = text.strip()
    m = re.fullmatch(r"(\d{4})-(\d{2})-(\d{2})", text)
    if m:
        return int(m.group(1)), int(m.group(2)), int(m.group(3))
    year = month = day = None
    for word in re.findall(r"[A-Za-z]+|\d+", text):
        low = word.lower()
        if low in MONTHS:
            month = MONTHS[low]
        elif word.isdigit() and len(word) == 4:
            year = int(word)
        elif word.isdigit() and 1 <= int(word) <= 31:
            day = int(word)
    return year, month, day


def _coord_value(tok: str) -> tuple[float, str]:
    deg, rest = tok[:-1].split(":")
    return int(deg) + float(rest) / 60.0, tok[-1]


def parse_coords(text: str) -> tuple[float, float] | None:
    lat = lon = None
    for tok in COORD_RE.findall(text):
        value, hemi = _coord_value(tok)
        if hemi in "NS":
            lat = value if hemi == "N" else -value
        else:
            lon = value if hemi == "E" else -value
    if lat is None or lon is None:
        return None
    return lat, lon


def format_coords(lat: float, lon: float) -> str:
    """Inverse of :func:`parse_coords` at minute precision, e.g. ``05:28N - 002:21E``."""
    def part(v, pos, neg, width):
        hemi = pos if v >= 0 else neg
        v = abs(v)
        deg = int(v)
        minutes = round((v - deg) * 60)
        if minutes == 60:
            deg, minutes = deg + 1, 0
        return f"{deg:0{width}d}:{minutes:02d}{hemi}"
    return f"{part(lat, 'N', 'S', 2)} - {part(lon, 'E', 'W', 3)}"


def _norm_prefix(text: str) -> str:
    return " ".join(text.split()).lower()[:PREFIX_CHARS]


def _phrase_lemmas(text: str) -> list[str]:
    out = []
    for w in text.lower().split():
        out.append(lemmatize(w, "NNS" if w.endswith("s") and not w.endswith("ss") else "NN"))
    return out


def _contains(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    n = len(needle)
    return n > 0 and any(tuple(haystack[i:i + n]) == tuple(needle) for i in range(len(haystack) - n + 1))


def _date_matches(parsed: tuple[int | None, int | None, int | None], date: dt.date) -> bool:
    year, month, day = parsed
    return month == date.month and day == date.day and (year is None or year == date.year)


# ---------------------------------------------------------------- entity-level evidence

SLOT_OF = {("Actor", "Victim"): "victim", ("Actor", "Aggressor"): "aggressor",
           ("Date", None): "date", ("Location", None): "location", ("IncidentType", None): "incident"}

EntityVotes = dict[tuple[str, str], bool]  # (entity_id, slot) -> polarity


def _put(table: EntityVotes, conflicts: set, key: tuple[str, str], value: bool) -> None:
    if key in conflicts:
        return
    if key in table and table[key] != value:
        del table[key]
        conflicts.add(key)
    else:
        table[key] = value


def _propagate(cands: Iterable[RelationCandidate], table: EntityVotes, source: str) -> list[LabelVote]:
    votes = []
    for c in cands:
        rt = RELATIONS[c.rtype]
        lv = table.get((c.left.entity_id, SLOT_OF[rt.left_spec]))
        rv = table.get((c.right.entity_id, SLOT_OF[rt.right_spec]))
        if lv is False or rv is False:
            votes.append(LabelVote(c.candidate_id, source, False))
        elif lv is True and rv is True:
            votes.append(LabelVote(c.candidate_id, source, True))
    return votes


def _mention_coords(m: Mention, gazetteers) -> tuple[float, float] | None:
    coords = parse_coords(m.surface)
    if coords is None and gazetteers is not None:
        coords = gazetteers.place_coords(m.surface.split())
    return coords


def db_entity_votes(
    doc: Document,
    mentions: list[Mention],
    dbs: Sequence[SecondaryDB],
    alias_rules: Mapping[str, str] | None = None,
    tolerance: float = COORD_TOLERANCE,
) -> EntityVotes:
    if dbs is None:
        raise ValueError("secondary databases not loaded")
    alias_rules = alias_rules or {}
    dates = [(m, parse_date(m.surface)) for m in mentions if m.etype == "Date"]
    coords = [(m, parse_coords(m.surface)) for m in mentions if m.etype == "Location"]
    positioned = [(m, c) for m, c in coords if c is not None]
    if not dates or not positioned:
        return {}
    prefix = _norm_prefix(doc.text)

    def near(c, r):
        return abs(c[0] - r.lat) <= tolerance and abs(c[1] - r.lon) <= tolerance

    table: EntityVotes = {}
    conflicts: set = set()
    actors = [m for m in mentions if m.etype == "Actor"]
    for db in dbs:
        matched = []
        for _, parsed in dates:
            if parsed[1] is None or parsed[2] is None:
                continue
            for r in db.on_day(parsed[1], parsed[2]):
                if not _date_matches(parsed, r.date) or not any(near(c, r) for _, c in positioned):
                    continue
                if db.kind == "Maritime" and _norm_prefix(r.text_prefix) != prefix:
                    continue
                if r not in matched:
                    matched.append(r)
        for r in matched:
            for m, parsed in dates:
                _put(table, conflicts, (m.entity_id, "date"), _date_matches(parsed, r.date))
            for m, c in positioned:
                _put(table, conflicts, (m.entity_id, "location"), near(c, r))
            slot, field_value = ("victim", r.ship_type) if db.kind == "Piracy" else ("aggressor", r.aggressor)
            wanted = _phrase_lemmas(field_value)
            hits: dict[str, bool] = {}
            for m in actors:
                lemmas = mention_lemmas(doc, m)
                hit = _contains(lemmas, wanted) or (len(wanted) == 1 and m.head == wanted[0])
                hits[m.entity_id] = hits.get(m.entity_id, False) or hit
            for eid, hit in hits.items():
                _put(table, conflicts, (eid, slot), hit)
            if db.kind == "Piracy":
                for m in mentions:
                    if m.etype == "IncidentType":
                        canon = canonical_incident(doc, m, alias_rules)
                        _put(table, conflicts, (m.entity_id, "incident"), canon == r.incident_type)
    return table


def db_supervise(
    doc: Document,
    mentions: list[Mention],
    candidates: list[RelationCandidate],
    dbs: Sequence[SecondaryDB],
    alias_rules: Mapping[str, str] | None = None,
    tolerance: float = COORD_TOLERANCE,
) -> list[LabelVote]:
    table = db_entity_votes(doc, mentions, dbs, alias_rules, tolerance)
    return _propagate(candidates, table, DB_SOURCE) if table else []


def _gpos(doc: Document, m: Mention, offsets) -> tuple[int, int]:
    return offsets[m.sentence_index] + m.token_start, offsets[m.sentence_index] + m.token_end


def _distance(a: tuple[int, int], b: tuple[int, int]) -> int:
    if a[1] <= b[0]:
        return b[0] - a[1]
    if b[1] <= a[0]:
        return a[0] - b[1]
    return 0


def rule_entity_votes(doc: Document, mentions: list[Mention], rules: RoleRuleSet) -> EntityVotes:
    table: EntityVotes = {}
    conflicts: set = set()
    offsets = doc.sentence_offsets()
    victims = [m for m in mentions if m.etype == "Actor" and m.role == "Victim"]
    for m in mentions:
        if m.etype != "Actor":
            continue
        keyword = m.head in rules.aggressor_keywords
        if keyword or m.role == "Aggressor":
            _put(table, conflicts, (m.entity_id, "aggressor"), True)
            _put(table, conflicts, (m.entity_id, "victim"), False)
        elif m.role == "Victim":
            _put(table, conflicts, (m.entity_id, "victim"), True)
            _put(table, conflicts, (m.entity_id, "aggressor"), False)
        else:
            # no role evidence at all: a bystander, not a participant
            _put(table, conflicts, (m.entity_id, "victim"), False)
            _put(table, conflicts, (m.entity_id, "aggressor"), False)
    if not victims:
        return table
    # the incident is narrated in the sentence of the first victim mention
    anchor = min(victims, key=lambda v: (v.sentence_index, v.token_start))
    for m in mentions:
        if m.etype in ("Location", "IncidentType"):
            slot = "location" if m.etype == "Location" else "incident"
            _put(table, conflicts, (m.entity_id, slot), m.sentence_index == anchor.sentence_index)
    dates = [m for m in mentions if m.etype == "Date"]
    if dates:
        vpos = _gpos(doc, anchor, offsets)
        best = min(dates, key=lambda d: (_distance(_gpos(doc, d, offsets), vpos), d.sentence_index, d.token_start))
        for d in dates:
            _put(table, conflicts, (d.entity_id, "date"), d.entity_id == best.entity_id)
    return table


def rule_supervise(
    doc: Document,
    mentions: list[Mention],
    candidates: list[RelationCandidate],
    rules: RoleRuleSet,
) -> list[LabelVote]:
    votes = _propagate(candidates, rule_entity_votes(doc, mentions, rules), RULE_ENTITY)
    offsets = doc.sentence_offsets()
    dates = [m for m in mentions if m.etype == "Date"]
    flat = doc.flat_tokens()
    lemmas = [t.lemma.lower() for t in flat]
    for c in candidates:
        if c.rtype == "VictimDate" and c.left.role == "Victim":
            vp = _gpos(doc, c.left, offsets)
            nearest = min(dates, key=lambda d: (_distance(_gpos(doc, d, offsets), vp), d.sentence_index, d.token_start))
            votes.append(LabelVote(c.candidate_id, RULE_CLOSEST_DATE, c.right.mention_id == nearest.mention_id))
        elif c.rtype == "VictimAggressor" and c.left.sentence_index == c.right.sentence_index:
            a, b = sorted([_gpos(doc, c.left, offsets), _gpos(doc, c.right, offsets)])
            between = lemmas[a[1]:b[0]]
            if any(rules.act_at(between, i) for i in range(len(between))):
                votes.append(LabelVote(c.candidate_id, RULE_ACT_BETWEEN, True))
    return votes


# ---------------------------------------------------------------- resolution


def resolve_votes(votes: Iterable[LabelVote | bool]) -> bool | None:
    """Majority vote; ties (including no votes) abstain with None."""
    score = 0
    for v in votes:
        polarity = v.polarity if isinstance(v, LabelVote) else bool(v)
        score += 1 if polarity else -1
    if score > 0:
        return True
    if score < 0:
        return False
    return None


def filter_votes(votes: Iterable[LabelVote], mode: str) -> list[LabelVote]:
    if mode not in MODES:
        raise ValueError(f"unknown supervision mode {mode!r}")
    if mode == "both":
        return list(votes)
    prefix = DB_SOURCE if mode == "db-only" else "rules:"
    return [v for v in votes if v.source == prefix or v.source.startswith(prefix)]


def label_candidates(candidates: Iterable[RelationCandidate], votes: Iterable[LabelVote]) -> list[LabeledCandidate]:
    by_cand: dict[str, list[LabelVote]] = defaultdict(list)
    for v in votes:
        by_cand[v.candidate_id].append(v)
    out = []
    for c in candidates:
        vs = by_cand.get(c.candidate_id, [])
        out.append(LabeledCandidate(c, vs, resolve_votes(vs)))
    return out


def balance_training(labeled: list[LabeledCandidate], seed: int = 0) -> list[LabeledCandidate]:
    """Per relation type, downsample the majority polarity to the minority count."""
    by_type: dict[str, list[LabeledCandidate]] = defaultdict(list)
    for lc in labeled:
        if lc.resolved is not None:
            by_type[lc.candidate.rtype].append(lc)
    rng = random.Random(seed)
    out = []
    for rtype in sorted(by_type):
        pos = [lc for lc in by_type[rtype] if lc.resolved]
        neg = [lc for lc in by_type[rtype] if not lc.resolved]
        if not pos or not neg:
            warnings.warn(f"{rtype}: {len(pos)} True / {len(neg)} False labels; training on what exists")
            out.extend(pos + neg)
            continue
        k = min(len(pos), len(neg))
        if len(pos) > k:
            pos = rng.sample(pos, k)
        if len(neg) > k:
            neg = rng.sample(neg, k)
        out.extend(sorted(pos + neg, key=lambda lc: lc.candidate.candidate_id))
    return out
