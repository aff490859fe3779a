import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgforge.annotate import annotate
from kgforge.candidates import RelationCandidate, generate_all
from kgforge.corpus import Document
from kgforge.gazetteers import GazetteerSet, RuleConfig, alias_map
from kgforge.inference import Marginal
from kgforge.kgraph import (
    ancestors,
    build_graph,
    incidents,
    is_a,
    load_graph_jsonl,
    query,
    save_graph_jsonl,
    save_graph_tsv,
)
from kgforge.mentions import Mention, assign_roles, extract_mentions, link_entities

GZ = GazetteerSet.default()
RULES = RuleConfig.default()
ALIASES = alias_map(GZ, RULES.aliases)
CONTAINER_REPORT = "On 7 January, pirates boarded a container ship near Lagos."


def _doc(text, doc_id="boarding"):
    doc = annotate(Document(doc_id, text), GZ)
    ms = assign_roles(doc, link_entities(doc, extract_mentions(doc, GZ), ALIASES), RULES.roles)
    return doc, ms, generate_all(doc, ms)


def test_container_ship_victim_of_pirates():
    _, _, cands = _doc(CONTAINER_REPORT)
    va = next(c for c in cands if c.rtype == "VictimAggressor")
    graph = build_graph({va.candidate_id: 0.93}, cands, gazetteers=GZ)
    (t,) = graph
    assert (t.subject.cls, t.subject.role, t.predicate) == ("TransportShips", "Victim", "VictimAggressor")
    assert t.object.cls == "Individuals" and is_a(t.object.cls, "Actor")
    assert t.probability == 0.93 and t.incident == "incident:boarding"
    assert t.provenance[0]["left_span"] == [CONTAINER_REPORT.index("a container"), CONTAINER_REPORT.index(" near")]


def test_threshold_above_one_gives_empty_graph():
    _, _, cands = _doc(CONTAINER_REPORT)
    probs = {c.candidate_id: 1.0 for c in cands}
    assert build_graph(probs, cands, min_prob=1.01) == []
    assert len(build_graph(probs, cands)) == len(cands)


def _coref_pair():
    date = Mention("d:m0", "d", 0, 1, 3, "Date", "7 January", entity_id="d:e0", char_start=3, char_end=12)
    ship = Mention("d:m1", "d", 0, 5, 7, "Actor", "the tanker", "Victim", "d:e1", "tanker", 30, 40)
    again = Mention("d:m2", "d", 1, 0, 2, "Actor", "The vessel", "Victim", "d:e1", "vessel", 50, 60)
    c1 = RelationCandidate("d|VictimDate|d:m1|d:m0", "VictimDate", "d", ship, date)
    c2 = RelationCandidate("d|VictimDate|d:m2|d:m0", "VictimDate", "d", again, date)
    return c1, c2


def test_coreferent_spans_collapse_with_max():
    c1, c2 = _coref_pair()
    marg = [Marginal(c1.candidate_id, 0.8, 1000, 4), Marginal(c2.candidate_id, 0.9, 1000, 4)]
    (t,) = build_graph(marg, [c1, c2])
    assert t.probability == 0.9
    assert len(t.provenance) == 2
    assert {p["candidate_id"] for p in t.provenance} == {c1.candidate_id, c2.candidate_id}
    assert all(p["seed"] == 4 for p in t.provenance)


def test_aggregation_idempotent():
    c1, c2 = _coref_pair()
    once = build_graph({c1.candidate_id: 0.8, c2.candidate_id: 0.9}, [c1, c2])
    # rebuilding from the graph's own provenance reproduces it
    again = build_graph({p["candidate_id"]: p["probability"] for t in once for p in t.provenance}, [c2, c1])
    assert [t.to_dict() for t in again] == [t.to_dict() for t in once]


def _synthetic_graph(probabilities):
    triples = []
    for i, p in enumerate(probabilities):
        left = Mention(f"d{i}:m0", f"d{i}", 0, 0, 1, "Actor", "pirates", "Aggressor", f"d{i}:e0", "pirate", 0, 7)
        right = Mention(f"d{i}:m1", f"d{i}", 0, 3, 4, "Location", "Lagos", None, f"d{i}:e1", "lagos", 20, 25)
        triples.append((RelationCandidate(f"d{i}|AggressorLocation|m0|m1", "AggressorLocation", f"d{i}",
                                          left, right), p))
    cands = [c for c, _ in triples]
    return build_graph({c.candidate_id: p for c, p in triples}, cands, min_prob=0.0), cands


def test_query_min_prob_and_empty_filter():
    graph, _ = _synthetic_graph([0.95, 0.7, 0.91])
    assert len(query(graph, min_prob=0.9)) == 2
    assert query(graph) == graph
    assert [t.probability for t in query(graph)] == [0.95, 0.91, 0.7]


def test_query_class_uses_superclasses():
    _, _, cands = _doc(CONTAINER_REPORT)
    graph = build_graph({c.candidate_id: 0.8 for c in cands}, cands, gazetteers=GZ)
    ships = query(graph, cls="TransportShips")
    assert ships and all("TransportShips" in (t.subject.cls, t.object.cls) for t in ships)
    actors = query(graph, cls="Actor")
    assert set(map(id, ships)) <= set(map(id, actors))
    assert ancestors("TransportShips") == ["TransportShips", "Actor"]
    assert query(graph, role="Victim") == [t for t in graph if t.subject.role == "Victim"]


@given(st.lists(st.floats(0, 1), min_size=1, max_size=12), st.sampled_from([None, "AggressorLocation", "VictimDate"]),
       st.integers(0, 12), st.floats(0, 1))
@settings(max_examples=100, deadline=None)
def test_query_matches_linear_scan(probs, relation, doc_index, min_prob):
    graph, _ = _synthetic_graph(probs)
    doc_id = f"d{doc_index}"
    expected = [t for t in graph
                if (relation is None or t.predicate == relation)
                and t.probability >= min_prob
                and any(p["doc_id"] == doc_id for p in t.provenance)]
    assert query(graph, relation=relation, doc_id=doc_id, min_prob=min_prob) == expected


def test_provenance_reslices_to_text():
    doc, _, cands = _doc(CONTAINER_REPORT + " The crew raised the alarm.")
    graph = build_graph({c.candidate_id: 0.7 for c in cands}, cands, gazetteers=GZ)
    assert graph
    for t in graph:
        for p in t.provenance:
            for a, b in (p["left_span"], p["right_span"]):
                assert doc.text[a:b].strip()


def test_incidents_group_by_document():
    graph, _ = _synthetic_graph([0.6, 0.7])
    assert set(incidents(graph)) == {"incident:d0", "incident:d1"}


def test_save_and_load(tmp_path):
    _, _, cands = _doc(CONTAINER_REPORT)
    graph = build_graph({c.candidate_id: 0.75 for c in cands}, cands, gazetteers=GZ)
    path = tmp_path / "kg.jsonl"
    save_graph_jsonl(graph, path, meta={"config_hash": "abc", "seed": 0})
    back = load_graph_jsonl(path)
    assert [t.to_dict() for t in back] == [t.to_dict() for t in graph]
    tsv = tmp_path / "kg.tsv"
    save_graph_tsv(graph, tsv, header="config_hash=abc")
    lines = tsv.read_text().splitlines()
    assert lines[0] == "# config_hash=abc" and len(lines) == len(graph) + 2


def test_refreshed_mentions_override_candidate_endpoints():
    c1, _ = _coref_pair()
    moved = dataclasses.replace(c1.left, entity_id="d:e9")
    (t,) = build_graph({c1.candidate_id: 0.6}, [c1], mentions=[moved, c1.right])
    assert t.subject.entity == "d:e9"


def test_unknown_ontology_class_raises():
    with pytest.raises(KeyError):
        ancestors("Submarines")
