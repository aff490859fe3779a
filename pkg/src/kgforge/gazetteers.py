"""Word lists driving the rule annotator, mention extraction and role rules."""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def _read_entries(path: Path | str) -> list[list[str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].rstrip("\n").strip()
            if not line:
                continue
            rows.append([c.strip() for c in line.split("\t")])
    return rows


class PhraseTable:
    """Maps token sequences (tuples of lowercased strings) to a payload.

    Lookup is longest-match-first from a given start position.
    """

    def __init__(self, entries: Mapping[tuple[str, ...], object] | None = None):
        self._entries: dict[tuple[str, ...], object] = {}
        self.max_len = 0
        for key, value in (entries or {}).items():
            self.add(key, value)

    def add(self, key: Iterable[str], value: object = True) -> None:
        key = tuple(k.lower() for k in key)
        if not key:
            return
        self._entries[key] = value
        self.max_len = max(self.max_len, len(key))

    def __contains__(self, key) -> bool:
        return tuple(key) in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key, default=None):
        return self._entries.get(tuple(key), default)

    def keys(self):
        return self._entries.keys()

    def match_at(self, words: list[str], i: int) -> tuple[int, object] | None:
        """Return (length, payload) of the longest entry starting at ``words[i]``."""
        for n in range(min(self.max_len, len(words) - i), 0, -1):
            key = tuple(w.lower() for w in words[i:i + n])
            if key in self._entries:
                return n, self._entries[key]
        return None

    def find_all(self, words: list[str]) -> list[tuple[int, int, object]]:
        """Greedy left-to-right longest-match scan; returns (start, end, payload)."""
        out = []
        i = 0
        while i < len(words):
            hit = self.match_at(words, i)
            if hit is None:
                i += 1
                continue
            n, payload = hit
            out.append((i, i + n, payload))
            i += n
        return out


def _split_phrase(text: str) -> tuple[str, ...]:
    return tuple(text.lower().split())


@dataclass
class GazetteerSet:
    """Places (with optional coordinates), actor nouns and incident-type lemmas."""

    places: PhraseTable = field(default_factory=PhraseTable)
    actors: PhraseTable = field(default_factory=PhraseTable)
    incidents: PhraseTable = field(default_factory=PhraseTable)

    @classmethod
    def from_files(cls, places=None, actors=None, incidents=None) -> "GazetteerSet":
        gz = cls()
        if places:
            for row in _read_entries(places):
                coords = None
                if len(row) >= 3 and row[1] and row[2]:
                    coords = (float(row[1]), float(row[2]))
                gz.places.add(_split_phrase(row[0]), coords)
        if actors:
            for row in _read_entries(actors):
                gz.actors.add(_split_phrase(row[0]), row[1] if len(row) > 1 else "OtherShips")
        if incidents:
            for row in _read_entries(incidents):
                key = _split_phrase(row[0])
                gz.incidents.add(key, row[1] if len(row) > 1 else " ".join(key))
        return gz

    @classmethod
    def default(cls) -> "GazetteerSet":
        base = resources.files("kgforge") / "data"
        return cls.from_files(base / "places.txt", base / "actors.txt", base / "incidents.txt")

    def place_coords(self, words: list[str]) -> tuple[float, float] | None:
        return self.places.get(tuple(w.lower() for w in words))

    def actor_class(self, lemmas: list[str]) -> str | None:
        """Ontology subclass of the longest actor phrase ending the lemma list."""
        lemmas = [l.lower() for l in lemmas]
        for start in range(len(lemmas)):
            cls = self.actors.get(tuple(lemmas[start:]))
            if cls is not None:
                return cls
        return None


@dataclass
class RoleRuleSet:
    aggressor_keywords: frozenset[str]
    victim_keywords: frozenset[str]
    aggressive_acts: frozenset[tuple[str, ...]]
    window: int = 3

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("role window must be >= 1")
        self.aggressor_keywords = frozenset(k.lower() for k in self.aggressor_keywords)
        self.victim_keywords = frozenset(k.lower() for k in self.victim_keywords)
        self.aggressive_acts = frozenset(
            _split_phrase(a) if isinstance(a, str) else tuple(a) for a in self.aggressive_acts
        )

    def act_at(self, lemmas: list[str], i: int) -> int:
        """Length of the aggressive-act phrase starting at ``lemmas[i]`` (0 if none)."""
        best = 0
        for act in self.aggressive_acts:
            n = len(act)
            if n > best and tuple(l.lower() for l in lemmas[i:i + n]) == act:
                best = n
        return best


def _role_rules(table: Mapping, base: Mapping | None = None) -> RoleRuleSet:
    base = base or {}

    def pick(key, default):
        return table.get(key, base.get(key, default))

    return RoleRuleSet(
        aggressor_keywords=frozenset(pick("aggressor_keywords", [])),
        victim_keywords=frozenset(pick("victim_keywords", [])),
        aggressive_acts=frozenset(pick("aggressive_acts", [])),
        window=int(pick("window", 3)),
    )


@dataclass
class RuleConfig:
    """Role-assignment rules, supervision rules and incident aliases.

    The ``[supervision]`` table defaults key by key to ``[roles]``, so keyword
    lists used for labeling can be tuned without changing role assignment.
    """

    roles: RoleRuleSet
    aliases: dict[str, str]
    supervision: RoleRuleSet | None = None
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.supervision is None:
            self.supervision = self.roles

    @classmethod
    def from_toml(cls, path: Path | str | None = None) -> "RuleConfig":
        if path is None:
            text = (resources.files("kgforge") / "data" / "rules.toml").read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        raw = tomllib.loads(text)
        r = raw.get("roles", {})
        return cls(
            roles=_role_rules(r),
            aliases={k.lower(): v for k, v in raw.get("aliases", {}).items()},
            supervision=_role_rules(raw.get("supervision", {}), r),
            raw=raw,
        )

    @classmethod
    def default(cls) -> "RuleConfig":
        return cls.from_toml(None)


def load_keyword_file(path: Path | str) -> frozenset[str]:
    """Plain-text keyword list, one entry per line, ``#`` comments."""
    return frozenset(row[0].lower() for row in _read_entries(path))


def alias_map(gazetteers: GazetteerSet, extra: Mapping[str, str] | None = None) -> dict[str, str]:
    """Lemma phrase -> canonical incident type, from the incident gazetteer plus overrides."""
    out = {" ".join(k): str(v) for k, v in gazetteers.incidents._entries.items()}
    out.update({k.lower(): v for k, v in (extra or {}).items()})
    return out
