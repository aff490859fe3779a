"""Incident documents: types, JSONL/raw-text ingestion and train/dev/test splits."""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    surface: str
    lemma: str
    pos: str
    ner: str = "O"
    char_start: int = 0
    char_end: int = 0

    def to_dict(self) -> dict:
        return {
            "surface": self.surface,
            "lemma": self.lemma,
            "pos": self.pos,
            "ner": self.ner,
            "char_start": self.char_start,
            "char_end": self.char_end,
        }


Span = tuple[int, int, int]  # (sentence_index, token_start, token_end)


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    source: str = ""
    sentences: tuple[tuple[Token, ...], ...] = ()
    coref_chains: tuple[tuple[Span, ...], ...] = ()
    dep_parse: Any = None

    @property
    def is_annotated(self) -> bool:
        return bool(self.sentences) or not self.text.strip()

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)

    def sentence_offsets(self) -> list[int]:
        """Global index of the first token of each sentence."""
        out, n = [], 0
        for sent in self.sentences:
            out.append(n)
            n += len(sent)
        return out

    def flat_tokens(self) -> list[Token]:
        return [tok for sent in self.sentences for tok in sent]

    def to_dict(self) -> dict:
        out = {
            "doc_id": self.doc_id,
            "source": self.source,
            "text": self.text,
            "sentences": [[t.to_dict() for t in s] for s in self.sentences],
            "coref_chains": [[list(sp) for sp in chain] for chain in self.coref_chains],
        }
        if self.dep_parse is not None:
            out["dep_parse"] = self.dep_parse
        return out

    @classmethod
    def from_dict(cls, rec: dict) -> "Document":
        try:
            sentences = tuple(
                tuple(
                    Token(
                        surface=t["surface"],
                        lemma=t["lemma"],
                        pos=t["pos"],
                        ner=t.get("ner") or "O",
                        char_start=int(t["char_start"]),
                        char_end=int(t["char_end"]),
                    )
                    for t in sent
                )
                for sent in rec.get("sentences", [])
            )
            chains = tuple(
                tuple((int(a), int(b), int(c)) for a, b, c in chain)
                for chain in rec.get("coref_chains", [])
            )
            return cls(
                doc_id=str(rec["doc_id"]),
                source=str(rec.get("source", "")),
                text=rec["text"],
                sentences=sentences,
                coref_chains=chains,
                dep_parse=rec.get("dep_parse"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"malformed document record: {exc!r}") from exc


def validate_document(doc: Document) -> None:
    """Raise CorpusError on any broken token or coreference invariant."""
    for si, sent in enumerate(doc.sentences):
        prev_end = -1
        for ti, tok in enumerate(sent):
            where = f"{doc.doc_id}: sentence {si} token {ti}"
            if not tok.char_start < tok.char_end:
                raise CorpusError(f"{where}: empty or inverted char span")
            if tok.char_start < prev_end:
                raise CorpusError(f"{where}: overlaps previous token")
            if not tok.lemma or not tok.pos:
                raise CorpusError(f"{where}: empty lemma or pos")
            if doc.text[tok.char_start:tok.char_end] != tok.surface:
                raise CorpusError(
                    f"{where}: surface {tok.surface!r} does not match text "
                    f"{doc.text[tok.char_start:tok.char_end]!r}"
                )
            prev_end = tok.char_end
    for ci, chain in enumerate(doc.coref_chains):
        if len(chain) < 2:
            raise CorpusError(f"{doc.doc_id}: coref chain {ci} has fewer than 2 spans")
        for si, start, end in chain:
            if not (0 <= si < len(doc.sentences)) or not (0 <= start < end <= len(doc.sentences[si])):
                raise CorpusError(f"{doc.doc_id}: coref chain {ci} has invalid span {(si, start, end)}")


def iter_jsonl(path: Path | str) -> Iterator[tuple[int, dict]]:
    """Yield (line number, record); blank lines and ``_meta`` header records are skipped."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if isinstance(rec, dict) and "_meta" in rec:
                continue
            yield lineno, rec


def load_corpus(path: Path | str, format: str = "annotated-jsonl") -> list[Document]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    docs: list[Document] = []
    seen: set[str] = set()
    if format == "annotated-jsonl":
        for lineno, rec in iter_jsonl(path):
            if not isinstance(rec, dict):
                raise CorpusError(f"{path}:{lineno}: record is not an object")
            try:
                doc = Document.from_dict(rec)
                validate_document(doc)
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
            if doc.doc_id in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)
            docs.append(doc)
    elif format == "raw-text":
        # one incident paragraph per blank-line-separated block
        text = path.read_text(encoding="utf-8")
        blocks = [b.strip() for b in text.replace("\r\n", "\n").split("\n\n")]
        for i, block in enumerate(b for b in blocks if b):
            docs.append(Document(doc_id=f"{path.stem}-{i:05d}", text=" ".join(block.split()), source=path.name))
    else:
        raise ValueError(f"unknown corpus format {format!r}")
    return docs


def save_corpus(docs: Iterable[Document], path: Path | str, meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write(json.dumps({"_meta": meta}, sort_keys=True) + "\n")
        for doc in docs:
            fh.write(json.dumps(doc.to_dict(), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class CorpusSplit:
    train_ids: frozenset[str]
    dev_ids: frozenset[str]
    test_ids: frozenset[str]

    def which(self, doc_id: str) -> str:
        if doc_id in self.test_ids:
            return "test"
        if doc_id in self.dev_ids:
            return "dev"
        return "train"

    def to_dict(self) -> dict:
        return {k: sorted(getattr(self, k)) for k in ("train_ids", "dev_ids", "test_ids")}

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusSplit":
        return cls(*(frozenset(d[k]) for k in ("train_ids", "dev_ids", "test_ids")))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + 1e-12))


def split_corpus(
    docs: list[Document],
    test_fraction: float = 0.1,
    dev_fraction: float = 0.1,
    seed: int = 0,
    test_count: int | None = None,
) -> CorpusSplit:
    """Shuffle doc ids under ``seed``; test takes floor(test_fraction*N) (or ``test_count``),
    dev takes round-half-up(dev_fraction * remaining), train keeps the rest."""
    n = len(docs)
    if n < 3:
        raise CorpusError(f"corpus has {n} documents; need at least 3 to split")
    if not (0 < dev_fraction < 1) or (test_count is None and not (0 < test_fraction < 1)):
        raise ValueError("fractions must lie in (0, 1)")
    if test_count is None and test_fraction + dev_fraction >= 1:
        raise ValueError("test_fraction + dev_fraction must be < 1")
    ids = sorted(d.doc_id for d in docs)
    random.Random(seed).shuffle(ids)
    n_test = test_count if test_count is not None else math.floor(test_fraction * n)
    if not 0 < n_test < n:
        raise ValueError(f"test size {n_test} out of range for {n} documents")
    rest = n - n_test
    n_dev = min(_round_half_up(dev_fraction * rest), rest - 1)
    return CorpusSplit(
        train_ids=frozenset(ids[n_test + n_dev:]),
        dev_ids=frozenset(ids[n_test:n_test + n_dev]),
        test_ids=frozenset(ids[:n_test]),
    )
