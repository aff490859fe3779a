"""Synthetic piracy-incident corpus with planted gold relations and mirrored DB rows.

Each document narrates one incident: a victim ship, an aggressor group, an
act, a date and a position, optionally followed by coreferent mentions,
distractor actors (crew, navy, authorities), a clutter report date and a
distractor port. Every planted mention carries its truth status; a relation
between two planted mentions is gold-True iff both endpoints belong to the
incident and actors sit in the slot matching their planted role.
"""
from __future__ import annotations

import datetime as dt
import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .annotate import annotate
from .candidates import RELATION_TYPES
from .corpus import Document, save_corpus
from .gazetteers import GazetteerSet
from .mentions import extract_mentions
from .supervision import DBRecord, SecondaryDB, format_coords

DEFAULT_TEMPLATES: tuple[str, ...] = (
    "On {date}, {aggressor} {act} {victim} near position {coords}.",
    "On {date}, {victim} was {act} by {aggressor} near position {coords}.",
    "{aggressor} {act} {victim} near position {coords} on {date}.",
    "On {date}, {aggressor} in a speedboat {act} {victim} underway near position {coords}.",
    "{victim} was {act} by {aggressor} at anchor near position {coords} on {date}.",
    "On {date}, {aggressor} {act} {victim} and {kidnap} {crew} near position {coords}.",
)

ACTS = {  # surface -> canonical incident type
    "boarded": "boarding",
    "attacked": "attacking",
    "hijacked": "hijacking",
    "fired upon": "firing upon",
    "robbed": "robbery",
}
SHIP_TYPES = (
    "container ship", "cargo ship", "general cargo ship", "bulk carrier", "tanker", "oil tanker",
    "chemical tanker", "product tanker", "lpg tanker", "car carrier", "reefer", "passenger ferry",
    "fishing vessel", "trawler", "tug", "supply vessel", "offshore supply vessel", "yacht",
)
DB_GENERIC_TYPES = ("merchant vessel", "unknown vessel type", "motor vessel")
AGGRESSORS = ("pirates", "robbers", "gunmen", "intruders", "assailants", "attackers", "militants", "thieves")
AGGRESSOR_MODS = ("", "armed ", "four ", "five ", "six armed ", "several ", "masked ")
FLAGS = ("Panama-flagged ", "Liberia-flagged ", "Malta-flagged ", "Singapore-flagged ")
STATES = ("anchored ", "berthed ", "drifting ")
NAME_WORDS = ("OCEAN", "PEARL", "AMBER", "HORIZON", "BREEZE", "GLORY", "SPIRIT", "VOYAGER", "FORTUNE",
              "ATLAS", "NOVA", "ORION", "AURORA", "MERIDIAN", "OYA", "ANUKET", "TZE", "ZEPHYR", "KESTREL")
COUNTRIES = ("BRAZIL", "NIGERIA", "BENIN", "TOGO", "GHANA", "BANGLADESH", "INDONESIA", "MALAYSIA",
             "PHILIPPINES", "PERU", "CAMEROON", "SOMALIA", "YEMEN", "INDIA", "VIETNAM", "ANGOLA", "KENYA")
PORTS = ("Lagos", "Cotonou", "Lome", "Douala", "Manila", "Mombasa", "Luanda", "Callao", "Tema",
         "Abidjan", "Dumai", "Belawan", "Batam", "Takoradi", "Haiphong")
MONTH_NAMES = ("January", "February", "March", "April", "May", "June", "July", "August",
               "September", "October", "November", "December")
NUM_WORDS = ("two", "three", "four", "five", "six", "seven")


@dataclass(frozen=True)
class SynthSpec:
    n_documents: int = 200
    templates: tuple[str, ...] = DEFAULT_TEMPLATES
    distractor_rate: float = 0.3
    date_clutter_rate: float = 0.4
    coref_rate: float = 0.25
    db_coverage: float = 0.5
    db_noise: float = 0.35
    year_range: tuple[int, int] = (2014, 2020)


@dataclass
class Plant:
    char_start: int
    char_end: int
    etype: str
    role: str | None
    entity: str
    true: bool

    def to_dict(self) -> dict:
        return {"span": [self.char_start, self.char_end], "etype": self.etype, "role": self.role,
                "entity": self.entity, "true": self.true}


@dataclass
class SynthDoc:
    doc_id: str
    text: str
    plants: list[Plant]
    date: dt.date
    coords: tuple[float, float]
    ship_type: str
    aggressor: str
    incident_type: str


@dataclass
class SynthOutput:
    documents: list[Document]
    gold: list[dict]
    piracy: SecondaryDB
    maritime: SecondaryDB
    synth_docs: list[SynthDoc] = field(default_factory=list)


class _Builder:
    def __init__(self):
        self.parts: list[str] = []
        self.n = 0
        self.plants: list[Plant] = []

    def add(self, text: str) -> None:
        self.parts.append(text)
        self.n += len(text)

    def slot(self, text: str, etype: str, role: str | None, entity: str, true: bool) -> None:
        self.plants.append(Plant(self.n, self.n + len(text), etype, role, entity, true))
        self.add(text)

    @property
    def text(self) -> str:
        return "".join(self.parts)


def _date_text(rng: random.Random, d: dt.date, with_year: bool | None = None) -> str:
    style = rng.randrange(3) if with_year is None else (1 if with_year else 0)
    month = MONTH_NAMES[d.month - 1]
    if style == 0:
        return f"{d.day} {month}"
    if style == 1:
        return f"{d.day} {month} {d.year}"
    return f"{month} {d.day}, {d.year}"


def _article(word: str) -> str:
    return "an" if word[:1].lower() in "aeiou" else "a"


_SLOT_RE = re.compile(r"\{(\w+)\}")


def _render_doc(doc_id: str, spec: SynthSpec, rng: random.Random) -> SynthDoc:
    b = _Builder()
    y0, y1 = spec.year_range
    date = dt.date(rng.randint(y0, y1), rng.randint(1, 12), rng.randint(1, 28))
    lat = round(rng.uniform(-25, 25) * 60) / 60
    lon = round(rng.uniform(-120, 120) * 60) / 60
    ship = rng.choice(SHIP_TYPES)
    name = " ".join(rng.sample(NAME_WORDS, rng.randint(1, 2))) if rng.random() < 0.6 else ""
    mods = (rng.choice(FLAGS) if rng.random() < 0.3 else "") + (rng.choice(STATES) if rng.random() < 0.3 else "")
    aggr_noun = rng.choice(AGGRESSORS)
    aggr_mod = rng.choice(AGGRESSOR_MODS)
    act = rng.choice(list(ACTS))
    template = rng.choice(spec.templates)

    b.slot(rng.choice(COUNTRIES), "Location", None, "L:country", True)
    b.add(": ")
    pieces = _SLOT_RE.split(template)
    sentence_start = True
    for k, piece in enumerate(pieces):
        if k % 2 == 0:
            if piece:
                b.add(piece)
                sentence_start = False
            continue
        if piece == "date":
            b.slot(_date_text(rng, date), "Date", None, "D:true", True)
        elif piece == "coords":
            b.slot(format_coords(lat, lon), "Location", None, "L:coords", True)
        elif piece == "act":
            b.slot(act, "IncidentType", None, f"I:{ACTS[act]}", True)
        elif piece == "kidnap":
            b.slot("kidnapped", "IncidentType", None, "I:kidnapping", True)
        elif piece == "crew":
            b.slot(f"{rng.choice(NUM_WORDS)} crew members", "Actor", "Victim", "A:hostages", True)
        elif piece == "aggressor":
            text = aggr_mod + aggr_noun
            b.slot(text[0].upper() + text[1:] if sentence_start else text, "Actor", "Aggressor", "A:aggressor", True)
        elif piece == "victim":
            prev = b.parts[-1] if b.parts else ""
            core = mods + ship + (" " + name if name else "")
            if re.search(r"\b(a|an|the)\s$", prev):
                # the template supplies the determiner: absorb it into the span
                det_len = len(prev.rstrip().split()[-1]) + 1
                b.parts[-1] = prev[:-det_len]
                b.n -= det_len
                text = f"{_article(core)} {core}" if prev.rstrip().split()[-1] in ("a", "an") else f"the {core}"
            else:
                text = f"{rng.choice(['the', _article(core)])} {core}"
            if sentence_start:
                text = text[0].upper() + text[1:]
            b.slot(text, "Actor", "Victim", "A:victim", True)
        else:
            raise ValueError(f"unknown template slot {{{piece}}}")
        sentence_start = False

    extras = []
    if rng.random() < spec.coref_rate:
        extras.append("victim_coref")
    if rng.random() < spec.coref_rate:
        extras.append("aggressor_coref")
    if rng.random() < spec.distractor_rate:
        extras.append(rng.choice(["crew", "navy", "authority"]))
    if rng.random() < spec.date_clutter_rate:
        extras.append("clutter_date")
    if rng.random() < spec.distractor_rate:
        extras.append("port")
    rng.shuffle(extras)
    for e in extras:
        b.add(" ")
        if e == "victim_coref":
            b.slot(rng.choice(["The vessel", "The ship"]), "Actor", "Victim", "A:victim", True)
            b.add(rng.choice([" sustained minor damage.", " resumed her passage.", " was not damaged."]))
        elif e == "aggressor_coref":
            b.slot(f"The {aggr_noun}", "Actor", "Aggressor", "A:aggressor", True)
            b.add(rng.choice([" escaped in their skiff.", " fled the scene.", " escaped with cash and property."]))
        elif e == "crew":
            b.add(rng.choice(["Alarm was raised and ", "Fortunately "]))
            b.slot("the crew", "Actor", None, "A:crew", False)
            b.add(" mustered.")
        elif e == "navy":
            b.slot(rng.choice(["A naval vessel", "A patrol boat", "The coast guard"]), "Actor", None, "A:navy", False)
            b.add(" responded to the distress call.")
        elif e == "authority":
            b.slot("Local authorities", "Actor", None, "A:authority", False)
            b.add(" were informed.")
        elif e == "clutter_date":
            clutter = date + dt.timedelta(days=rng.randint(1, 9))
            b.add("The incident was reported on ")
            b.slot(_date_text(rng, clutter, False), "Date", None, "D:clutter", False)
            b.add(".")
        elif e == "port":
            b.slot("The master", "Actor", None, "A:master", False)
            b.add(" later reported to the agent in ")
            b.slot(rng.choice(PORTS), "Location", None, "L:port", False)
            b.add(".")
    return SynthDoc(doc_id, b.text, b.plants, date, (lat, lon), ship, aggr_noun, ACTS[act])


def gold_relations(sd: SynthDoc) -> list[dict]:
    out = []
    for rt in RELATION_TYPES:
        for lp in sd.plants:
            if lp.etype != rt.left_spec[0]:
                continue
            for rp in sd.plants:
                if rp.etype != rt.right_spec[0] or rp.entity == lp.entity:
                    continue
                # non-actor specs carry role None, as do their plants
                label = lp.true and rp.true and lp.role == rt.left_spec[1] and rp.role == rt.right_spec[1]
                out.append({"rtype": rt.name, "left": [lp.char_start, lp.char_end],
                            "right": [rp.char_start, rp.char_end], "label": bool(label)})
    return out


def _coref_chains(doc: Document, plants: list[Plant]) -> tuple:
    spans: dict[str, list] = {}
    for p in plants:
        if p.etype != "Actor":
            continue
        for si, sent in enumerate(doc.sentences):
            idx = [i for i, t in enumerate(sent) if t.char_start >= p.char_start and t.char_end <= p.char_end]
            if idx:
                spans.setdefault(p.entity, []).append((si, idx[0], idx[-1] + 1))
                break
    return tuple(tuple(v) for _, v in sorted(spans.items()) if len(v) >= 2)


def generate_synthetic(spec: SynthSpec, seed: int = 0, gazetteers: GazetteerSet | None = None) -> SynthOutput:
    if not spec.templates:
        raise ValueError("at least one template is required")
    gz = gazetteers or GazetteerSet.default()
    rng = random.Random(seed)
    docs, gold, sdocs = [], [], []
    piracy: list[DBRecord] = []
    maritime: list[DBRecord] = []
    width = max(5, len(str(spec.n_documents)))
    for i in range(spec.n_documents):
        sd = _render_doc(f"syn-{i:0{width}d}", spec, rng)
        doc = annotate(Document(sd.doc_id, sd.text, source="synthetic"), gz)
        doc = Document(doc.doc_id, doc.text, doc.source, doc.sentences, _coref_chains(doc, sd.plants))
        docs.append(doc)
        sdocs.append(sd)
        gold.append({"doc_id": sd.doc_id, "mentions": [p.to_dict() for p in sd.plants],
                     "relations": gold_relations(sd)})
        if rng.random() < spec.db_coverage:
            ship = sd.ship_type if rng.random() >= spec.db_noise else rng.choice(DB_GENERIC_TYPES)
            aggr = sd.aggressor if rng.random() >= spec.db_noise else rng.choice(["unknown", "armed men"])
            lat, lon = sd.coords
            rec = dict(date=sd.date, lat=round(lat, 4), lon=round(lon, 4), ship_type=ship,
                       aggressor=aggr, incident_type=sd.incident_type, text_prefix=sd.text[:60])
            piracy.append(DBRecord(**rec))
            maritime.append(DBRecord(**rec))
    return SynthOutput(docs, gold, SecondaryDB("Piracy", piracy), SecondaryDB("Maritime", maritime), sdocs)


def self_check(out: SynthOutput, gazetteers: GazetteerSet | None = None) -> float:
    """Fraction of planted mentions recovered with exact span and type by the extractor."""
    gz = gazetteers or GazetteerSet.default()
    total = hit = 0
    for doc, sd in zip(out.documents, out.synth_docs):
        found = {(m.char_start, m.char_end, m.etype) for m in extract_mentions(doc, gz)}
        for p in sd.plants:
            total += 1
            hit += (p.char_start, p.char_end, p.etype) in found
    return hit / total if total else 1.0


def write_synthetic(out: SynthOutput, out_dir: Path | str, meta: dict | None = None) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": out_dir / "corpus.jsonl",
        "gold": out_dir / "gold.jsonl",
        "piracy": out_dir / "piracy.csv",
        "maritime": out_dir / "maritime.csv",
    }
    save_corpus(out.documents, paths["corpus"], meta=meta)
    with open(paths["gold"], "w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write(json.dumps({"_meta": meta}, sort_keys=True) + "\n")
        for rec in out.gold:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    header = None if meta is None else json.dumps(meta, sort_keys=True)
    out.piracy.save_csv(paths["piracy"], header=header)
    out.maritime.save_csv(paths["maritime"], header=header)
    return paths
