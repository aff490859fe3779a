import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgforge.evaluation import (
    ScoredExample,
    accuracy,
    calibration,
    evaluate_relations,
    f1_from,
    gold_label,
    load_gold,
    pr_curve,
    prf1,
    roc_auc,
    roc_curve,
    select_threshold,
    write_metrics_csv,
)
from oracles import auc_pairs, threshold_scan


def _scored(probs, gold):
    return [ScoredExample(f"c{i}", float(p), bool(g)) for i, (p, g) in enumerate(zip(probs, gold))]


def test_threshold_separable():
    s = _scored([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
    t = select_threshold(s)
    assert 0.2 < t <= 0.8
    assert t == 0.8
    assert accuracy(s, t) == 1.0


def test_threshold_all_true_warns():
    s = _scored([0.3, 0.6, 0.9], [1, 1, 1])
    with pytest.warns(UserWarning):
        t = select_threshold(s)
    assert t == 0.0 and accuracy(s, t) == 1.0


def test_threshold_empty_raises():
    with pytest.raises(ValueError):
        select_threshold([])


@pytest.mark.parametrize("seed", range(5))
def test_threshold_matches_scan_on_twenty(seed):
    rng = np.random.default_rng(seed)
    probs = np.round(rng.random(20), 2)
    gold = rng.random(20) < probs
    if gold.all() or not gold.any():
        gold[0] = not gold[0]
    assert select_threshold(_scored(probs, gold)) == threshold_scan(list(probs), list(gold))


def test_prf_examples():
    assert f1_from(0.96, 0.96) == pytest.approx(0.96)
    assert f1_from(0.5, 1.0) == pytest.approx(2 / 3)
    s = _scored([0.9, 0.8, 0.7, 0.1], [1, 0, 0, 0])
    p, r, f = prf1(s, 0.5)
    assert (p, r) == (pytest.approx(1 / 3), 1.0) and f == pytest.approx(0.5)
    none = prf1(s, 0.95)
    assert none.f1 == 0 and "no_predicted_positives" in none.flags
    assert "no_gold_positives" in prf1(_scored([0.4], [0]), 0.5).flags


def test_auc_examples():
    assert roc_auc(_scored([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0])) == 1.0
    assert roc_auc(_scored([0.5] * 6, [1, 0, 1, 0, 1, 0])) == 0.5
    assert math.isnan(roc_auc(_scored([0.5, 0.7], [1, 1])))


def test_auc_fifty_random_matches_pairs():
    rng = np.random.default_rng(1)
    probs = np.round(rng.random(50), 1)  # rounding forces ties
    gold = rng.random(50) < 0.4
    assert roc_auc(_scored(probs, gold)) == pytest.approx(auc_pairs(probs, gold), abs=1e-12)


PROBS = st.lists(st.tuples(st.sampled_from([i / 20 for i in range(21)]), st.booleans()), min_size=2, max_size=40)


@given(PROBS)
@settings(max_examples=200, deadline=None)
def test_auc_invariant_under_monotone_transform(pairs):
    probs, gold = zip(*pairs)
    if all(gold) or not any(gold):
        return
    base = roc_auc(_scored(probs, gold))
    for f in (lambda p: p ** 3, lambda p: math.exp(p) / 3, lambda p: 0.5 + 0.4 * math.tanh(p)):
        moved = [f(p) for p in probs]
        assert roc_auc(_scored(moved, gold)) == pytest.approx(base, abs=1e-12)


@given(PROBS)
@settings(max_examples=200, deadline=None)
def test_recall_one_at_threshold_zero(pairs):
    probs, gold = zip(*pairs)
    if any(gold):
        assert prf1(_scored(probs, gold), 0.0).recall == 1.0


def test_curves_endpoints():
    s = _scored([0.9, 0.7, 0.7, 0.2], [1, 0, 1, 0])
    roc = roc_curve(s)
    assert roc[0] == (0.0, 0.0) and roc[-1] == (1.0, 1.0)
    assert all(b[0] >= a[0] and b[1] >= a[1] for a, b in zip(roc, roc[1:]))
    pr = pr_curve(s)
    assert pr[0] == (0.5, 1.0) and pr[-1] == (1.0, 0.5)


def test_calibration_top_bin_only():
    dev = _scored([0.91, 0.95, 1.0, 0.99], [1, 1, 1, 1])
    rep = calibration(dev, [s.probability for s in dev])
    assert rep.bins[-1].dev_accuracy == 1.0 and rep.bins[-1].dev_count == 4
    assert all(b.dev_count == 0 and b.dev_accuracy is None for b in rep.bins[:-1])


def test_calibration_uniform_grid():
    probs = [0.05 + 0.1 * k for k in range(10)]
    rep = calibration(_scored(probs, [k % 2 == 0 for k in range(10)]), probs)
    assert [b.dev_count for b in rep.bins] == [1] * 10
    assert [b.all_count for b in rep.bins] == [1] * 10


@given(st.lists(st.floats(0, 1), max_size=60), st.lists(st.floats(0, 1), max_size=200))
@settings(max_examples=150, deadline=None)
def test_calibration_counts_sum(dev_probs, all_probs):
    rep = calibration(_scored(dev_probs, [p > 0.5 for p in dev_probs]), all_probs)
    assert rep.dev_total == len(dev_probs) and rep.all_total == len(all_probs)


def test_gold_formats(tmp_path):
    path = tmp_path / "gold.jsonl"
    lines = [
        {"_meta": {"seed": 0}},
        {"candidate_id": "docA|VictimDate|docA:m0|docA:m1", "label": True},
        {"doc_id": "docB", "rtype": "VictimDate", "left": [0, 5], "right": [9, 12], "label": True},
        {"doc_id": "docC", "relations": [{"rtype": "VictimDate", "left": [1, 2], "right": [3, 4], "label": False}]},
    ]
    path.write_text("\n".join(json.dumps(x) for x in lines) + "\n")
    labels, docs = load_gold(path)
    assert docs == {"docA", "docB", "docC"}

    class C:
        def __init__(self, cid, doc, span_l, span_r):
            self.candidate_id, self.doc_id, self.rtype = cid, doc, "VictimDate"
            self.left = type("M", (), {"char_start": span_l[0], "char_end": span_l[1]})
            self.right = type("M", (), {"char_start": span_r[0], "char_end": span_r[1]})

    assert gold_label(C("docA|VictimDate|docA:m0|docA:m1", "docA", (0, 1), (2, 3)), labels, docs) is True
    assert gold_label(C("x", "docB", (0, 5), (9, 12)), labels, docs) is True
    assert gold_label(C("y", "docC", (1, 2), (3, 4)), labels, docs) is False
    assert gold_label(C("z", "docC", (7, 8), (3, 4)), labels, docs) is False
    assert gold_label(C("w", "docZ", (7, 8), (3, 4)), labels, docs) is None


def test_metrics_csv(tmp_path):
    test = {"VictimDate": _scored([0.9, 0.2, 0.8], [1, 0, 1]), "AggressorDate": _scored([0.6, 0.4], [1, 0])}
    val = {"VictimDate": _scored([0.9, 0.1], [1, 0]), "AggressorDate": _scored([0.7, 0.3], [1, 0])}
    metrics = evaluate_relations(test, val)
    path = tmp_path / "m.csv"
    write_metrics_csv(metrics, path, header="h")
    rows = path.read_text().splitlines()
    assert rows[1] == "relation,candidates,f1,roc_auc,recall,precision"
    # cuts land on validation points: 0.9 and 0.7, so 0.8 and 0.6 become misses
    assert [m.threshold for m in metrics] == [0.7, 0.9]
    assert rows[2].startswith("AggressorDate,2,0.0000,1.0000")
    assert rows[3].startswith("VictimDate,3,0.6667,1.0000")
    assert rows[-1].startswith("Average,5,0.3333")
