import dataclasses
import datetime as dt

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from handannotated import ANUKET, case
from kgforge.annotate import annotate
from kgforge.candidates import generate_all
from kgforge.corpus import Document
from kgforge.gazetteers import GazetteerSet, RuleConfig, alias_map
from kgforge.mentions import assign_roles, extract_mentions, link_entities
from kgforge.supervision import (
    DBRecord,
    LabeledCandidate,
    LabelVote,
    SecondaryDB,
    balance_training,
    db_supervise,
    filter_votes,
    format_coords,
    label_candidates,
    parse_coords,
    parse_date,
    resolve_votes,
    rule_entity_votes,
    rule_supervise,
)

GZ = GazetteerSet.default()
RULES = RuleConfig.default()
ALIASES = alias_map(GZ, RULES.aliases)
OYA_REPORT = ("NIGERIA: On 29 October, armed pirates boarded the general cargo ship OYA near position "
        "04:12N – 006:55E and kidnapped five crewmen.")


def _oya(crew_role_unset=True):
    doc = annotate(Document("oya", OYA_REPORT), GZ)
    ms = assign_roles(doc, link_entities(doc, extract_mentions(doc, GZ), ALIASES), RULES.roles)
    if crew_role_unset:
        ms = [dataclasses.replace(m, role=None) if m.surface == "five crewmen" else m for m in ms]
    return doc, ms, generate_all(doc, ms)


def _dbs(ship="general cargo ship", aggressor="pirates", day=29):
    rec = DBRecord(dt.date(2019, 10, day), 4.2, 6.9167, ship, aggressor, "boarding", OYA_REPORT[:60])
    return [SecondaryDB("Piracy", [rec]), SecondaryDB("Maritime", [rec])]


def _vote(votes, cands, left, right, rtype):
    c = next(c for c in cands if c.rtype == rtype and c.left.surface == left and c.right.surface == right)
    return [v.polarity for v in votes if v.candidate_id == c.candidate_id]


def test_parsers():
    assert parse_date("29 October") == (None, 10, 29)
    assert parse_date("3 March 2019") == (2019, 3, 3)
    assert parse_date("2019-03-03") == (2019, 3, 3)
    lat, lon = parse_coords("05:28N – 002:21E")
    assert lat == pytest.approx(5 + 28 / 60) and lon == pytest.approx(2 + 21 / 60)
    assert parse_coords(format_coords(-12.5, -77.25)) == pytest.approx((-12.5, -77.25))


def test_db_votes_victim_and_false_candidate():
    doc, ms, cands = _oya()
    votes = db_supervise(doc, ms, cands, _dbs(), ALIASES)
    assert _vote(votes, cands, "the general cargo ship OYA", "armed pirates", "VictimAggressor") == [True]
    assert _vote(votes, cands, "the general cargo ship OYA", "five crewmen", "VictimAggressor") == [False]
    assert _vote(votes, cands, "the general cargo ship OYA", "29 October", "VictimDate") == [True]


def test_db_ship_type_mismatch_gives_false_victim():
    doc, ms, cands = _oya()
    votes = db_supervise(doc, ms, cands, _dbs(ship="bulk carrier"), ALIASES)
    assert _vote(votes, cands, "the general cargo ship OYA", "armed pirates", "VictimAggressor") == [False]


def test_db_no_match_no_votes():
    doc, ms, cands = _oya()
    assert db_supervise(doc, ms, cands, _dbs(day=28), ALIASES) == []
    assert db_supervise(doc, ms, cands, [SecondaryDB("Piracy"), SecondaryDB("Maritime")], ALIASES) == []


def test_db_unloaded_is_error():
    doc, ms, cands = _oya()
    with pytest.raises(ValueError):
        db_supervise(doc, ms, cands, None)


def test_rule_votes_on_oya_report():
    doc, ms, cands = _oya(crew_role_unset=False)
    votes = rule_supervise(doc, ms, cands, RULES.supervision)
    between = [v for v in votes if v.source == "rules:act_between"]
    oya_pirates = next(c for c in cands if c.rtype == "VictimAggressor"
                       and c.left.surface.endswith("OYA") and c.right.surface == "armed pirates")
    assert LabelVote(oya_pirates.candidate_id, "rules:act_between", True) in between
    assert resolve_votes([v for v in votes if v.candidate_id == oya_pirates.candidate_id]) is True
    pirates = next(m for m in ms if m.surface == "armed pirates")
    table = rule_entity_votes(doc, ms, RULES.supervision)
    assert table[(pirates.entity_id, "aggressor")] is True


def test_closest_date_example_two():
    doc, ms = case(ANUKET)
    cands = generate_all(doc, ms)
    votes = rule_supervise(doc, ms, cands, RULES.supervision)
    closest = {v.candidate_id: v.polarity for v in votes if v.source == "rules:closest_date"}
    by_pair = {(c.left.surface, c.right.surface): closest.get(c.candidate_id)
               for c in cands if c.rtype == "VictimDate"}
    # "7 January" ends 10 tokens before "tanker"; "October 2018" starts 13 after it
    assert by_pair[("tanker", "7 January")] is True
    assert by_pair[("tanker", "October 2018")] is False


def test_resolve_examples():
    assert resolve_votes([True, True, False]) is True
    assert resolve_votes([True, False]) is None
    assert resolve_votes([]) is None
    assert resolve_votes([False]) is False


@given(st.lists(st.booleans(), max_size=12), st.randoms())
@settings(max_examples=200, deadline=None)
def test_resolve_symmetric_and_flips(votes, rnd):
    shuffled = list(votes)
    rnd.shuffle(shuffled)
    r = resolve_votes(votes)
    assert resolve_votes(shuffled) == r
    flipped = resolve_votes([not v for v in votes])
    assert flipped == (None if r is None else not r)


def _labeled(n_true, n_false, rtype="VictimDate"):
    doc, ms = case(0)
    c = generate_all(doc, ms)[0]
    out = []
    for i in range(n_true + n_false):
        ci = dataclasses.replace(c, candidate_id=f"c{i:04d}", rtype=rtype)
        out.append(LabeledCandidate(ci, [], i < n_true))
    return out


def test_balance_examples():
    out = balance_training(_labeled(30, 90), seed=1)
    pos = sum(lc.resolved for lc in out)
    assert pos == 30 and len(out) - pos in (30, 31)
    already = _labeled(10, 10)
    assert {lc.candidate.candidate_id for lc in balance_training(already)} == \
        {lc.candidate.candidate_id for lc in already}
    with pytest.warns(UserWarning):
        out = balance_training(_labeled(5, 0))
    assert len(out) == 5


def test_balance_excludes_abstain_and_is_seeded():
    data = _labeled(20, 50) + [LabeledCandidate(_labeled(1, 0)[0].candidate, [], None)]
    a, b = balance_training(data, seed=7), balance_training(data, seed=7)
    assert [x.candidate.candidate_id for x in a] == [x.candidate.candidate_id for x in b]
    assert all(x.resolved is not None for x in a)


@given(st.integers(0, 40), st.integers(0, 40), st.integers(0, 100))
@settings(max_examples=100, deadline=None)
def test_balance_property(n_true, n_false, seed):
    data = _labeled(n_true, n_false)
    if not data:
        assert balance_training(data, seed) == []
        return
    if n_true == 0 or n_false == 0:
        with pytest.warns(UserWarning):
            out = balance_training(data, seed)
        assert len(out) == n_true + n_false
        return
    out = balance_training(data, seed)
    pos = sum(x.resolved for x in out)
    assert abs(pos - (len(out) - pos)) <= 1


def _synthetic_votes(seed):
    from kgforge.synth import SynthSpec, generate_synthetic

    out = generate_synthetic(SynthSpec(n_documents=25, db_coverage=0.6), seed=seed)
    dbs = [out.piracy, out.maritime]
    rows = []
    for doc in out.documents:
        ms = assign_roles(doc, link_entities(doc, extract_mentions(doc, GZ), ALIASES), RULES.roles)
        cands = generate_all(doc, ms)
        rows.append((doc, ms, cands, db_supervise(doc, ms, cands, dbs, ALIASES),
                     rule_supervise(doc, ms, cands, RULES.supervision)))
    return out, rows


def test_combined_superset_of_each_mode():
    _, rows = _synthetic_votes(3)
    for _, _, cands, db, rules in rows:
        both = db + rules
        assert set(filter_votes(both, "db-only")) == set(db)
        assert set(filter_votes(both, "rules-only")) == set(rules)
        assert set(both) >= set(db) | set(rules)


def test_documents_without_db_row_get_no_db_votes():
    out, rows = _synthetic_votes(5)
    covered = {(r.date.month, r.date.day, r.text_prefix) for r in out.piracy.records}
    for doc, _, _, db, _ in rows:
        if not any(doc.text.startswith(p) for _, _, p in covered):
            assert db == []


def test_label_candidates_majority():
    doc, ms, cands = _oya()
    c0, c1 = cands[0], cands[1]
    votes = [LabelVote(c0.candidate_id, "db", True), LabelVote(c0.candidate_id, "rules:entity", True),
             LabelVote(c0.candidate_id, "rules:act_between", False), LabelVote(c1.candidate_id, "db", True),
             LabelVote(c1.candidate_id, "rules:entity", False)]
    labeled = {lc.candidate.candidate_id: lc.resolved for lc in label_candidates(cands, votes)}
    assert labeled[c0.candidate_id] is True
    assert labeled[c1.candidate_id] is None
    assert labeled[cands[2].candidate_id] is None
    with pytest.raises(ValueError):
        filter_votes(votes, "neither")
