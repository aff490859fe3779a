import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgforge.annotate import annotate
from kgforge.corpus import CorpusError, Document, load_corpus, save_corpus, split_corpus
from kgforge.gazetteers import GazetteerSet

GZ = GazetteerSet.default()

TEXTS = [
    "BRAZIL: On 29 October, robbers boarded a passenger ferry. The crew raised the alarm.",
    "Pirates attacked the tanker near position 05:28N – 002:21E. Two crew members were injured.",
    "On 3 March 2019, thieves stole ship stores from the anchored bulk carrier at Lagos anchorage.",
]


def _annotated(i, text):
    return annotate(Document(f"d{i}", text, source="test"), GZ)


def _docs(n):
    return [Document(f"doc{i:04d}", "") for i in range(n)]


def test_two_sentence_record_round_trip(tmp_path):
    doc = _annotated(0, TEXTS[0])
    path = tmp_path / "c.jsonl"
    save_corpus([doc], path)
    back = load_corpus(path)
    assert len(back) == 1 and len(back[0].sentences) == 2
    assert back == [doc]


def test_duplicate_doc_id_rejected(tmp_path):
    doc = _annotated(0, TEXTS[0])
    rec = json.dumps(doc.to_dict())
    path = tmp_path / "c.jsonl"
    path.write_text(rec + "\n" + rec + "\n")
    with pytest.raises(CorpusError, match="duplicate"):
        load_corpus(path)


def test_three_documents_reslice(tmp_path):
    docs = [_annotated(i, t) for i, t in enumerate(TEXTS)]
    path = tmp_path / "c.jsonl"
    save_corpus(docs, path, meta={"seed": 1})
    back = load_corpus(path)
    assert len(back) == 3
    for d in back:
        for tok in d.flat_tokens():
            assert d.text[tok.char_start:tok.char_end] == tok.surface


def test_malformed_record_reports_line(tmp_path):
    path = tmp_path / "c.jsonl"
    good = json.dumps(_annotated(0, TEXTS[0]).to_dict())
    path.write_text(good + "\n{not json\n")
    with pytest.raises(CorpusError, match=":2:"):
        load_corpus(path)


def test_invalid_span_rejected(tmp_path):
    rec = _annotated(0, TEXTS[0]).to_dict()
    rec["sentences"][0][0]["char_end"] += 3
    path = tmp_path / "c.jsonl"
    path.write_text(json.dumps(rec) + "\n")
    with pytest.raises(CorpusError, match=":1:"):
        load_corpus(path)


def test_raw_text_leaves_annotation_empty(tmp_path):
    path = tmp_path / "reports.txt"
    path.write_text(TEXTS[0] + "\n\n" + TEXTS[1] + "\n")
    docs = load_corpus(path, "raw-text")
    assert len(docs) == 2
    assert all(not d.sentences and not d.is_annotated for d in docs)


def test_split_full_scale():
    s = split_corpus(_docs(1940), dev_fraction=0.1, seed=3, test_count=75)
    assert len(s.test_ids) == 75
    assert len(s.dev_ids) in (186, 187)
    assert len(s.train_ids) == 1940 - 75 - len(s.dev_ids)


def test_split_small_rounding():
    s = split_corpus(_docs(10), test_fraction=0.2, dev_fraction=0.1, seed=0)
    assert (len(s.test_ids), len(s.dev_ids), len(s.train_ids)) == (2, 1, 7)


def test_split_too_small():
    with pytest.raises(CorpusError):
        split_corpus(_docs(2))


@given(st.integers(3, 300), st.floats(0.01, 0.45), st.floats(0.01, 0.45), st.integers(0, 2**31))
@settings(max_examples=150, deadline=None)
def test_split_deterministic_and_disjoint(n, tf, df, seed):
    docs = _docs(n)
    if int(tf * n) == 0:
        with pytest.raises(ValueError):
            split_corpus(docs, tf, df, seed)
        return
    a, b = split_corpus(docs, tf, df, seed), split_corpus(docs, tf, df, seed)
    assert a == b
    assert not (a.test_ids & a.dev_ids or a.test_ids & a.train_ids or a.dev_ids & a.train_ids)
    assert a.test_ids | a.dev_ids | a.train_ids == {d.doc_id for d in docs}
    assert a.train_ids


WORDS = st.sampled_from(["pirates", "boarded", "the", "tanker", "On", "7", "January", ",", ".", "crew",
                         "05:28N", "–", "002:21E", "kidnapped", "Lagos", "2019", "robbers", "stole", "!"])


@given(st.lists(st.lists(WORDS, min_size=1, max_size=12), min_size=1, max_size=5))
@settings(max_examples=60, deadline=None)
def test_round_trip_and_offsets(tmp_path_factory, paragraphs):
    docs = [annotate(Document(f"p{i}", " ".join(ws)), GZ) for i, ws in enumerate(paragraphs)]
    for d in docs:
        for tok in d.flat_tokens():
            assert d.text[tok.char_start:tok.char_end] == tok.surface
    path = tmp_path_factory.mktemp("rt") / "c.jsonl"
    save_corpus(docs, path)
    assert load_corpus(path) == docs
