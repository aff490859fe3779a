"""Thresholds, precision/recall/F1, ROC and PR curves, calibration bins, ablation."""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .corpus import iter_jsonl


@dataclass(frozen=True)
class ScoredExample:
    candidate_id: str
    probability: float
    gold: bool


def _arrays(scored: Sequence[ScoredExample]) -> tuple[np.ndarray, np.ndarray]:
    p = np.array([s.probability for s in scored], dtype=np.float64)
    y = np.array([bool(s.gold) for s in scored], dtype=bool)
    return p, y


def select_threshold(validation: Sequence[ScoredExample]) -> float:
    """Accuracy-maximising cut ``p >= t`` over distinct probabilities plus 0 and 1.

    Ties go to the lowest threshold. A single-class set triggers a warning but
    is scanned the same way.
    """
    if not validation:
        raise ValueError("empty validation set")
    p, y = _arrays(validation)
    if y.all() or not y.any():
        warnings.warn("validation set has a single class; threshold is degenerate")
    cuts = np.unique(np.concatenate([p, [0.0, 1.0]]))
    order = np.argsort(p, kind="stable")
    ps, ys = p[order], y[order]
    # below[k]: number of examples with p < cuts[k]
    below = np.searchsorted(ps, cuts, side="left")
    neg_cum = np.concatenate([[0], np.cumsum(~ys)])
    pos_total = int(ys.sum())
    pos_below = below - neg_cum[below]
    correct = neg_cum[below] + (pos_total - pos_below)
    return float(cuts[int(np.argmax(correct))])


def accuracy(scored: Sequence[ScoredExample], threshold: float) -> float:
    p, y = _arrays(scored)
    return float(np.mean((p >= threshold) == y)) if len(p) else float("nan")


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    flags: frozenset[str] = frozenset()

    def __iter__(self):
        return iter((self.precision, self.recall, self.f1))


def prf1(scored: Sequence[ScoredExample], threshold: float) -> PRF:
    p, y = _arrays(scored)
    pred = p >= threshold
    tp = int((pred & y).sum())
    fp = int((pred & ~y).sum())
    fn = int((~pred & y).sum())
    flags = set()
    if tp + fp == 0:
        flags.add("no_predicted_positives")
        precision = 0.0
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        flags.add("no_gold_positives")
        recall = 0.0
    else:
        recall = tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return PRF(precision, recall, f1, frozenset(flags))


def f1_from(precision: float, recall: float) -> float:
    return 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)


def roc_auc(scored: Sequence[ScoredExample]) -> float:
    """Mann-Whitney AUC with ties counted one half; NaN when a class is missing."""
    p, y = _arrays(scored)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(p)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _sweep(scored: Sequence[ScoredExample]):
    """(tp, fp) after admitting each distinct probability, highest first."""
    p, y = _arrays(scored)
    order = np.argsort(-p, kind="stable")
    ps, ys = p[order], y[order]
    tps = np.cumsum(ys)
    fps = np.cumsum(~ys)
    last = np.r_[np.flatnonzero(np.diff(ps) != 0), len(ps) - 1] if len(ps) else np.array([], dtype=int)
    return ps[last], tps[last], fps[last], int(ys.sum()), int((~ys).sum())


def roc_curve(scored: Sequence[ScoredExample]) -> list[tuple[float, float]]:
    _, tps, fps, npos, nneg = _sweep(scored)
    pts = [(0.0, 0.0)]
    for tp, fp in zip(tps, fps):
        pts.append((fp / nneg if nneg else 0.0, tp / npos if npos else 0.0))
    return pts


def pr_curve(scored: Sequence[ScoredExample]) -> list[tuple[float, float]]:
    _, tps, fps, npos, _ = _sweep(scored)
    return [(tp / npos if npos else 0.0, tp / (tp + fp)) for tp, fp in zip(tps, fps)]


# ---------------------------------------------------------------- calibration

N_BINS = 10


@dataclass(frozen=True)
class CalibrationBin:
    lo: float
    hi: float
    dev_accuracy: float | None
    dev_count: int
    all_count: int


@dataclass(frozen=True)
class CalibrationReport:
    bins: tuple[CalibrationBin, ...]

    @property
    def dev_total(self) -> int:
        return sum(b.dev_count for b in self.bins)

    @property
    def all_total(self) -> int:
        return sum(b.all_count for b in self.bins)

    def extreme_mass(self) -> float:
        """Fraction of whole-set predictions in the lowest and highest bins."""
        total = self.all_total
        return (self.bins[0].all_count + self.bins[-1].all_count) / total if total else float("nan")


def bin_index(p: float) -> int:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    return min(int(math.floor(p * N_BINS)), N_BINS - 1)


def calibration(dev_scored: Sequence[ScoredExample], all_probs: Iterable[float]) -> CalibrationReport:
    dev_n = [0] * N_BINS
    dev_ok = [0] * N_BINS
    all_n = [0] * N_BINS
    for s in dev_scored:
        k = bin_index(s.probability)
        dev_n[k] += 1
        dev_ok[k] += int(bool(s.gold))
    for p in all_probs:
        all_n[bin_index(p)] += 1
    bins = tuple(
        CalibrationBin(k / N_BINS, (k + 1) / N_BINS, dev_ok[k] / dev_n[k] if dev_n[k] else None, dev_n[k], all_n[k])
        for k in range(N_BINS)
    )
    return CalibrationReport(bins)


# ---------------------------------------------------------------- gold and reports


def load_gold(path: Path | str) -> tuple[dict, set[str]]:
    """Gold labels keyed by candidate id or by (doc_id, rtype, left span, right span).

    Returns (labels, gold_doc_ids). Records are ``{"candidate_id", "label"}``,
    ``{"doc_id", "rtype", "left": [cs, ce], "right": [cs, ce], "label"}``, or a
    per-document ``{"doc_id", "relations": [...]}`` bundle of the latter.
    """
    labels: dict = {}
    docs: set[str] = set()
    for _, rec in iter_jsonl(path):
        if "relations" in rec:
            docs.add(rec["doc_id"])
            for r in rec["relations"]:
                labels[(rec["doc_id"], r["rtype"], tuple(r["left"]), tuple(r["right"]))] = bool(r["label"])
            continue
        if "candidate_id" in rec:
            labels[rec["candidate_id"]] = bool(rec["label"])
            docs.add(rec["candidate_id"].split("|", 1)[0])
        else:
            key = (rec["doc_id"], rec["rtype"], tuple(rec["left"]), tuple(rec["right"]))
            labels[key] = bool(rec["label"])
            docs.add(rec["doc_id"])
        if "doc_id" in rec:
            docs.add(rec["doc_id"])
    return labels, docs


def gold_label(cand, labels: Mapping, gold_docs: set[str]) -> bool | None:
    """Gold truth of a candidate; unlisted candidates in gold documents are False."""
    if cand.candidate_id in labels:
        return labels[cand.candidate_id]
    key = (cand.doc_id, cand.rtype, (cand.left.char_start, cand.left.char_end),
           (cand.right.char_start, cand.right.char_end))
    if key in labels:
        return labels[key]
    return False if cand.doc_id in gold_docs else None


@dataclass
class RelationMetrics:
    relation: str
    candidates: int
    threshold: float
    precision: float
    recall: float
    f1: float
    roc_auc: float
    flags: frozenset[str] = frozenset()


def evaluate_relations(
    test: Mapping[str, Sequence[ScoredExample]],
    validation: Mapping[str, Sequence[ScoredExample]],
) -> list[RelationMetrics]:
    """Per relation type: threshold from ``validation``, metrics on ``test``."""
    out = []
    for rtype in sorted(test):
        val = validation.get(rtype) or []
        if val:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                t = select_threshold(val)
        else:
            warnings.warn(f"{rtype}: no validation examples; threshold 0.5")
            t = 0.5
        r = prf1(test[rtype], t)
        out.append(RelationMetrics(rtype, len(test[rtype]), t, r.precision, r.recall, r.f1,
                                   roc_auc(test[rtype]), r.flags))
    return out


def average_f1(metrics: Sequence[RelationMetrics]) -> float:
    return float(np.mean([m.f1 for m in metrics])) if metrics else float("nan")


def _fmt(x: float) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.4f}"


def write_metrics_csv(metrics: Sequence[RelationMetrics], path: Path | str, header: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["relation", "candidates", "f1", "roc_auc", "recall", "precision"])
        for m in metrics:
            w.writerow([m.relation, m.candidates, _fmt(m.f1), _fmt(m.roc_auc), _fmt(m.recall), _fmt(m.precision)])
        if metrics:
            w.writerow(["Average", sum(m.candidates for m in metrics), _fmt(average_f1(metrics)),
                        _fmt(float(np.nanmean([m.roc_auc for m in metrics]))),
                        _fmt(float(np.mean([m.recall for m in metrics]))),
                        _fmt(float(np.mean([m.precision for m in metrics])))])


def write_curves_csv(test: Mapping[str, Sequence[ScoredExample]], path: Path | str, header: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["relation", "curve", "x", "y"])
        for rtype in sorted(test):
            for x, y in roc_curve(test[rtype]):
                w.writerow([rtype, "roc", _fmt(x), _fmt(y)])
            for x, y in pr_curve(test[rtype]):
                w.writerow([rtype, "pr", _fmt(x), _fmt(y)])


def write_calibration_csv(report: CalibrationReport, path: Path | str, header: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "dev_accuracy", "dev_count", "all_count"])
        for b in report.bins:
            acc = "" if b.dev_accuracy is None else f"{b.dev_accuracy:.4f}"
            w.writerow([f"{b.lo:.1f}", f"{b.hi:.1f}", acc, b.dev_count, b.all_count])


def write_ablation_csv(table: Mapping[str, Mapping[str, float]], path: Path | str, header: str | None = None) -> None:
    modes = list(table)
    rtypes = sorted({r for m in modes for r in table[m]})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["relation", *modes])
        for r in rtypes:
            w.writerow([r, *(_fmt(table[m].get(r, float("nan"))) for m in modes)])


def save_scored(scored: Iterable[ScoredExample], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in scored:
            fh.write(json.dumps({"candidate_id": s.candidate_id, "probability": s.probability, "gold": s.gold}) + "\n")


# ---------------------------------------------------------------- ablation


@dataclass
class AblationResult:
    f1: dict[str, dict[str, float]] = field(default_factory=dict)
    flags: dict[str, list[str]] = field(default_factory=dict)


def ablation(
    train_candidates,
    votes,
    eval_candidates,
    dev_candidates,
    gold: Mapping[str, bool],
    modes: Sequence[str] = ("db-only", "rules-only", "both"),
    l2: float = 1e-4,
    epochs: int = 50,
    lr: float = 0.1,
    seed: int = 0,
) -> AblationResult:
    """Re-resolve votes filtered by source, retrain, and score each mode.

    ``gold`` maps candidate id to truth for every dev and eval candidate.
    """
    from .inference import infer_corpus, learn_weights
    from .supervision import balance_training, filter_votes, label_candidates

    result = AblationResult()
    for mode in modes:
        labeled = label_candidates(train_candidates, filter_votes(votes, mode))
        train = balance_training(labeled, seed)
        flags = []
        present = {lc.candidate.rtype for lc in train}
        if not train:
            flags.append("no training labels: every candidate abstained")
        per_type: dict[str, float] = {}
        weights = learn_weights(train, l2=l2, epochs=epochs, lr=lr, seed=seed) if train else None
        by_type_eval: dict[str, list] = {}
        for c in eval_candidates:
            by_type_eval.setdefault(c.rtype, []).append(c)
        by_type_dev: dict[str, list] = {}
        for c in dev_candidates:
            by_type_dev.setdefault(c.rtype, []).append(c)
        for rtype in sorted(by_type_eval):
            if weights is None or rtype not in present:
                flags.append(f"{rtype}: untrained")
                per_type[rtype] = 0.0
                continue
            ev = infer_corpus(by_type_eval[rtype], weights)
            dv = infer_corpus(by_type_dev.get(rtype, []), weights)
            test = {rtype: [ScoredExample(m.candidate_id, m.probability, gold[m.candidate_id]) for m in ev]}
            val = {rtype: [ScoredExample(m.candidate_id, m.probability, gold[m.candidate_id]) for m in dv]}
            per_type[rtype] = evaluate_relations(test, val)[0].f1
        result.f1[mode] = per_type
        result.flags[mode] = flags
    return result
