"""Sparse binary feature strings for relation candidates.

Sequence and window features follow document order: the mention appearing
first in the text is "first" regardless of its slot in the relation. Length
and capitalisation features follow the candidate's (left, right) slot order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .candidates import RelationCandidate
from .corpus import Document
from .mentions import Mention

DEFAULT_WINDOWS = (1, 2, 3)
MAX_GAP = 40


class FeatureDictionary:
    """Bijective intern table between feature strings and integer ids."""

    def __init__(self, strings: Iterable[str] = ()):
        self._ids: dict[str, int] = {}
        self._strings: list[str] = []
        for s in strings:
            self.add(s)

    def add(self, s: str) -> int:
        fid = self._ids.get(s)
        if fid is None:
            fid = len(self._strings)
            self._ids[s] = fid
            self._strings.append(s)
        return fid

    def get(self, s: str) -> int | None:
        return self._ids.get(s)

    def string(self, fid: int) -> str:
        return self._strings[fid]

    def __len__(self) -> int:
        return len(self._strings)

    def __contains__(self, s: str) -> bool:
        return s in self._ids

    def save(self, path: Path | str, header: str | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            if header:
                fh.write(f"# {header}\n")
            for i, s in enumerate(self._strings):
                fh.write(f"{i}\t{s}\n")

    @classmethod
    def load(cls, path: Path | str) -> "FeatureDictionary":
        d = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("#") or not line.strip():
                    continue
                fid, s = line.rstrip("\n").split("\t", 1)
                if int(fid) != d.add(s):
                    raise ValueError(f"{path}: non-contiguous feature id {fid}")
        return d


@dataclass(frozen=True)
class FeatureVector:
    feature_ids: frozenset[int]
    dictionary: FeatureDictionary

    def strings(self) -> set[str]:
        return {self.dictionary.string(i) for i in self.feature_ids}


def _global_span(doc: Document, m: Mention, offsets: Sequence[int]) -> tuple[int, int]:
    base = offsets[m.sentence_index]
    return base + m.token_start, base + m.token_end


def _word_count(doc: Document, m: Mention) -> int:
    toks = doc.sentences[m.sentence_index][m.token_start:m.token_end]
    return sum(1 for t in toks if any(c.isalnum() for c in t.surface))


def _body(values: Iterable[str]) -> str:
    return "[" + " ".join(values) + "]"


def feature_strings(doc: Document, cand: RelationCandidate, windows: Sequence[int] = DEFAULT_WINDOWS) -> list[str]:
    left, right = cand.left, cand.right
    if left.doc_id != doc.doc_id or right.doc_id != doc.doc_id:
        raise ValueError(f"candidate {cand.candidate_id} mentions are not in document {doc.doc_id}")
    offsets = doc.sentence_offsets()
    ls, le = _global_span(doc, left, offsets)
    rs, re_ = _global_span(doc, right, offsets)
    inverted = rs < ls
    first, second = (right, left) if inverted else (left, right)
    (fs, fe), (ss, se) = ((rs, re_), (ls, le)) if inverted else ((ls, le), (rs, re_))

    flat = doc.flat_tokens()
    gap = flat[fe:ss] if ss >= fe else []
    feats = []
    if len(gap) > MAX_GAP:
        feats.append("LONG_GAP")
    else:
        feats.append("POS_SEQ_" + _body(t.pos for t in gap))
        feats.append("NER_SEQ_" + _body(t.ner for t in gap))
        feats.append("LEMMA_SEQ_" + _body(t.lemma for t in gap))
        feats.append("WORD_SEQ_" + _body(t.surface for t in gap))
    feats.append(f"LENGTHS_[{_word_count(doc, left)}_{_word_count(doc, right)}]")
    feats.append(f"STARTS_WITH_CAPITAL_[{left.surface[:1].isupper()}_{right.surface[:1].isupper()}]")

    first_sent = doc.sentences[first.sentence_index]
    second_sent = doc.sentences[second.sentence_index]
    for k in windows:
        lwin = first_sent[max(0, first.token_start - k):first.token_start]
        rwin = second_sent[second.token_end:second.token_end + k]
        feats.append(f"W_LEMMA_L_{k}_R_{k}_" + _body(t.lemma for t in lwin) + "_" + _body(t.lemma for t in rwin))
        feats.append(f"W_NER_L_{k}_R_{k}_" + _body(t.ner for t in lwin) + "_" + _body(t.ner for t in rwin))
    if inverted:
        feats.append("INVERTED")
    return feats


def expected_feature_count(n_windows: int, inverted: bool, long_gap: bool) -> int:
    return 6 + 2 * n_windows + int(inverted) - 3 * int(long_gap)


def extract_features(
    doc: Document,
    cand: RelationCandidate,
    windows: Sequence[int] = DEFAULT_WINDOWS,
    dictionary: FeatureDictionary | None = None,
) -> FeatureVector:
    dictionary = dictionary if dictionary is not None else FeatureDictionary()
    ids = frozenset(dictionary.add(s) for s in feature_strings(doc, cand, windows))
    return FeatureVector(ids, dictionary)


def featurize(doc: Document, cands: list[RelationCandidate], dictionary: FeatureDictionary,
              windows: Sequence[int] = DEFAULT_WINDOWS) -> None:
    """Fill ``features`` on every candidate in place (single-threaded interning pass)."""
    for c in cands:
        c.features = extract_features(doc, c, windows, dictionary).feature_ids


def save_vectors(cands: Iterable[RelationCandidate], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in cands:
            fh.write(json.dumps({"candidate_id": c.candidate_id, "features": sorted(c.features)}) + "\n")


def load_vectors(path: Path | str) -> dict[str, frozenset[int]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                out[rec["candidate_id"]] = frozenset(rec["features"])
    return out
