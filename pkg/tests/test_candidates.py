import itertools

from hypothesis import given, settings
from hypothesis import strategies as st

from handannotated import case
from kgforge.candidates import RELATION_TYPES, RELATIONS, generate_all, generate_candidates
from kgforge.corpus import Document, Token
from kgforge.mentions import Mention


def test_eight_relation_types():
    assert len(RELATION_TYPES) == 8
    for rt in RELATION_TYPES:
        for side, (etype, role) in (("left", rt.left_spec), ("right", rt.right_spec)):
            name = role or etype
            assert name in rt.name


def test_oya_report_victim_aggressor():
    doc, ms = case(1)  # armed pirates / OYA / five crewmen
    oya = next(m for m in ms if "OYA" in m.surface)
    crew = next(m for m in ms if m.surface == "five crewmen")
    # "five crewmen" with no role fits either slot
    ms = [m if m is not crew else Mention(**{**m.to_dict(), "role": None}) for m in ms]
    pairs = {(c.left.surface, c.right.surface) for c in generate_candidates(doc, ms, "VictimAggressor")}
    assert (oya.surface, "Armed pirates") in pairs
    assert (oya.surface, "five crewmen") in pairs


def _doc(n_tokens: int) -> Document:
    words = [f"w{i}" for i in range(n_tokens)]
    text = " ".join(words)
    toks, pos = [], 0
    for w in words:
        toks.append(Token(w, w, "NN", "O", pos, pos + len(w)))
        pos += len(w) + 1
    return Document("d", text, sentences=(tuple(toks),))


def _m(i, a, b, etype, role=None, entity=None):
    return Mention(f"d:m{i}", "d", 0, a, b, etype, "x", role, entity_id=entity or f"d:e{i}")


def test_cross_product():
    doc = _doc(20)
    ms = [_m(0, 0, 1, "Actor", "Victim"), _m(1, 2, 3, "Actor", "Victim"),
          _m(2, 5, 6, "Date"), _m(3, 7, 8, "Date"), _m(4, 9, 11, "Date")]
    assert len(generate_candidates(doc, ms, "VictimDate")) == 6


def test_overlapping_pair_excluded():
    doc = _doc(10)
    ms = [_m(0, 0, 4, "Actor", "Victim"), _m(1, 2, 3, "Date"), _m(2, 6, 7, "Date")]
    cands = generate_candidates(doc, ms, "VictimDate")
    assert [c.right.mention_id for c in cands] == ["d:m2"]


def test_empty_and_date_only():
    doc = _doc(5)
    assert generate_all(doc, []) == []
    assert generate_all(doc, [_m(0, 0, 1, "Date"), _m(1, 2, 3, "Date")]) == []


def test_ids_unique_and_deterministic():
    doc, ms = case(19)
    a, b = generate_all(doc, ms), generate_all(doc, ms)
    assert [c.candidate_id for c in a] == [c.candidate_id for c in b]
    assert len({c.candidate_id for c in a}) == len(a)


ETYPE_ROLE = st.sampled_from([("Actor", "Victim"), ("Actor", "Aggressor"), ("Actor", None),
                              ("Date", None), ("Location", None), ("IncidentType", None)])


@st.composite
def mention_sets(draw):
    n = draw(st.integers(0, 7))
    out = []
    for i in range(n):
        a = draw(st.integers(0, 14))
        b = draw(st.integers(a + 1, 15))
        etype, role = draw(ETYPE_ROLE)
        entity = f"d:e{draw(st.integers(0, 4))}"
        out.append(_m(i, a, b, etype, role, entity))
    return out


def _eligible(m, etype, role):
    return m.etype == etype and (role is None or m.role in (None, role))


@given(mention_sets())
@settings(max_examples=200, deadline=None)
def test_count_matches_brute_force(ms):
    doc = _doc(16)
    for rt in RELATION_TYPES:
        lefts = [m for m in ms if _eligible(m, *rt.left_spec)]
        rights = [m for m in ms if _eligible(m, *rt.right_spec)]
        overlap = sum(1 for l, r in itertools.product(lefts, rights)
                      if l.token_start < r.token_end and r.token_start < l.token_end)
        same = sum(1 for l, r in itertools.product(lefts, rights)
                   if l.entity_id == r.entity_id
                   and not (l.token_start < r.token_end and r.token_start < l.token_end))
        expected = len(lefts) * len(rights) - overlap - same
        assert len(generate_candidates(doc, ms, RELATIONS[rt.name])) == expected
