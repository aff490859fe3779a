"""Log-linear factor graph over candidate truth variables.

Each Boolean variable carries unary factors, one per active feature, whose
value is the feature weight when the variable is true. Optional implication
factors ``head => body`` contribute a fixed weight whenever the implication
holds. Weights are learned per relation type by stochastic gradient ascent on
the L2-regularised conditional log-likelihood of the resolved labels.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numba
import numpy as np
from scipy import sparse

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Marginal:
    candidate_id: str
    probability: float
    n_samples: int
    seed: int

    def to_dict(self) -> dict:
        return {"candidate_id": self.candidate_id, "probability": self.probability,
                "seed": self.seed, "n_samples": self.n_samples}


@dataclass
class FactorGraph:
    """Variables ``0..n-1``; ``unary_features[i]`` lists the feature ids on variable i.

    ``couplings`` holds (head, body) implication pairs with weights ``coupling_weights``.
    """

    unary_features: list[np.ndarray]
    weights: np.ndarray
    couplings: list[tuple[int, int]] = field(default_factory=list)
    coupling_weights: np.ndarray | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.unary_features = [np.asarray(f, dtype=np.int64) for f in self.unary_features]
        for f in self.unary_features:
            if f.size and (f.min() < 0 or f.max() >= self.weights.size):
                raise ValueError("unary factor references a feature id outside the weight table")
        if self.coupling_weights is None:
            self.coupling_weights = np.zeros(len(self.couplings))
        self.coupling_weights = np.asarray(self.coupling_weights, dtype=np.float64)
        if len(self.coupling_weights) != len(self.couplings):
            raise ValueError("one weight per coupling factor required")
        n = self.n_vars
        for h, b in self.couplings:
            if not (0 <= h < n and 0 <= b < n) or h == b:
                raise ValueError(f"invalid coupling ({h}, {b})")

    @classmethod
    def from_log_odds(cls, log_odds: Sequence[float], couplings=(), rho: float | Sequence[float] = 0.0) -> "FactorGraph":
        """One private feature per variable whose weight is that variable's log-odds."""
        n = len(log_odds)
        couplings = list(couplings)
        cw = np.broadcast_to(np.asarray(rho, dtype=np.float64), (len(couplings),)).copy()
        return cls([np.array([i]) for i in range(n)], np.asarray(log_odds, dtype=np.float64), couplings, cw)

    @property
    def n_vars(self) -> int:
        return len(self.unary_features)

    def log_odds(self) -> np.ndarray:
        return np.array([self.weights[f].sum() for f in self.unary_features], dtype=np.float64)

    def energy(self, assignment: Sequence[int]) -> float:
        x = np.asarray(assignment, dtype=bool)
        e = float(self.log_odds()[x].sum())
        for (h, b), w in zip(self.couplings, self.coupling_weights):
            if (not x[h]) or x[b]:
                e += w
        return e


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


# ---------------------------------------------------------------- Gibbs sampling


@numba.njit(cache=True)
def _gibbs_chunk(x, unary, adj_ptr, adj_factor, adj_is_head, f_head, f_body, f_weight,
                 uniforms, counts, count_from):
    n_sweeps, n = uniforms.shape
    for s in range(n_sweeps):
        for i in range(n):
            z = unary[i]
            for k in range(adj_ptr[i], adj_ptr[i + 1]):
                f = adj_factor[k]
                if adj_is_head[k]:
                    # head=1 satisfies iff body; head=0 always satisfies
                    z += f_weight[f] * (x[f_body[f]] - 1.0)
                else:
                    # body=1 always satisfies; body=0 satisfies iff not head
                    z += f_weight[f] * x[f_head[f]]
            p1 = 1.0 / (1.0 + math.exp(-z)) if z > -700.0 else 0.0
            x[i] = 1 if uniforms[s, i] < p1 else 0
        if s >= count_from:
            for i in range(n):
                counts[i] += x[i]


def gibbs_probabilities(graph: FactorGraph, n_samples: int, burn_in: int, seed: int) -> np.ndarray:
    """Systematic-scan Gibbs; returns the fraction of post-burn-in sweeps each variable is true."""
    if not n_samples > burn_in >= 0:
        raise ValueError("need n_samples > burn_in >= 0")
    unary = graph.log_odds()
    if not np.all(np.isfinite(unary)) or not np.all(np.isfinite(graph.coupling_weights)):
        raise ValueError("non-finite weight in factor graph")
    n = graph.n_vars
    if n == 0:
        return np.zeros(0)
    m = len(graph.couplings)
    f_head = np.array([h for h, _ in graph.couplings], dtype=np.int64).reshape(m)
    f_body = np.array([b for _, b in graph.couplings], dtype=np.int64).reshape(m)
    incident: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for f, (h, b) in enumerate(graph.couplings):
        incident[h].append((f, 1))
        incident[b].append((f, 0))
    adj_ptr = np.zeros(n + 1, dtype=np.int64)
    adj_ptr[1:] = np.cumsum([len(a) for a in incident])
    adj_factor = np.array([f for a in incident for f, _ in a], dtype=np.int64)
    adj_is_head = np.array([h for a in incident for _, h in a], dtype=np.int8)

    rng = np.random.default_rng(seed)
    x = (rng.random(n) < sigmoid(unary)).astype(np.float64)
    counts = np.zeros(n, dtype=np.int64)
    chunk = max(1, (1 << 18) // n)
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        u = rng.random((k, n))
        _gibbs_chunk(x, unary, adj_ptr, adj_factor, adj_is_head, f_head, f_body,
                     graph.coupling_weights, u, counts, max(0, burn_in - done))
        done += k
    return counts / float(n_samples - burn_in)


def gibbs_marginals(graph: FactorGraph, n_samples: int, burn_in: int, seed: int,
                    ids: Sequence[str] | None = None) -> list[Marginal]:
    probs = gibbs_probabilities(graph, n_samples, burn_in, seed)
    ids = ids if ids is not None else [str(i) for i in range(graph.n_vars)]
    return [Marginal(cid, float(p), n_samples, seed) for cid, p in zip(ids, probs)]


# ---------------------------------------------------------------- learning


def design_matrix(feature_sets: Sequence[Iterable[int]], n_features: int) -> sparse.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    for fs in feature_sets:
        indices.extend(sorted(fs))
        indptr.append(len(indices))
    data = np.ones(len(indices), dtype=np.float64)
    return sparse.csr_matrix((data, np.array(indices, dtype=np.int64), np.array(indptr)),
                             shape=(len(feature_sets), n_features))


def objective(w: np.ndarray, X: sparse.csr_matrix, y: np.ndarray, l2: float) -> float:
    """Negative L2-regularised conditional log-likelihood."""
    z = X @ w
    # log(1 + e^z) - y z, computed stably
    nll = np.logaddexp(0.0, z) - y * z
    return float(nll.sum() + 0.5 * l2 * np.dot(w, w))


def gradient(w: np.ndarray, X: sparse.csr_matrix, y: np.ndarray, l2: float) -> np.ndarray:
    z = X @ w
    return X.T @ (sigmoid(z) - y) + l2 * w


@numba.njit(cache=True)
def _sgd_epoch(w, indptr, indices, y, order, lr):
    for n in order:
        z = 0.0
        for k in range(indptr[n], indptr[n + 1]):
            z += w[indices[k]]
        g = 1.0 / (1.0 + math.exp(-z)) - y[n] if z > -700.0 else -y[n]
        for k in range(indptr[n], indptr[n + 1]):
            w[indices[k]] -= lr * g


def sgd_fit(X: sparse.csr_matrix, y: np.ndarray, l2: float = 1e-4, epochs: int = 50,
            lr: float = 0.1, seed: int = 0) -> np.ndarray:
    """Per-example logistic SGD with lr/sqrt(epoch) decay and per-epoch L2 shrinkage."""
    n, d = X.shape
    w = np.zeros(d, dtype=np.float64)
    if n == 0:
        return w
    rng = np.random.default_rng(seed)
    indptr = X.indptr.astype(np.int64)
    indices = X.indices.astype(np.int64)
    yy = np.asarray(y, dtype=np.float64)
    for epoch in range(1, epochs + 1):
        step = lr / math.sqrt(epoch)
        _sgd_epoch(w, indptr, indices, yy, rng.permutation(n), step)
        if l2:
            w *= max(0.0, 1.0 - step * l2)
    return w


@dataclass
class Weights:
    """Per-relation-type weight vectors over a shared feature dictionary."""

    by_type: dict[str, dict[int, float]]
    known: frozenset[int] = frozenset()

    def vector(self, rtype: str, n_features: int) -> np.ndarray:
        w = np.zeros(n_features)
        for fid, val in self.by_type.get(rtype, {}).items():
            if fid < n_features:
                w[fid] = val
        return w

    def score(self, rtype: str, features: Iterable[int]) -> float:
        table = self.by_type.get(rtype, {})
        return sum(table.get(f, 0.0) for f in features)

    def save(self, path: Path | str, header: str | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            if header:
                fh.write(f"# {header}\n")
            fh.write("# known " + " ".join(str(f) for f in sorted(self.known)) + "\n")
            for rtype in sorted(self.by_type):
                for fid in sorted(self.by_type[rtype]):
                    fh.write(f"{rtype}\t{fid}\t{self.by_type[rtype][fid]!r}\n")

    @classmethod
    def load(cls, path: Path | str) -> "Weights":
        by_type: dict[str, dict[int, float]] = {}
        known: set[int] = set()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("# known"):
                    known.update(int(t) for t in line.split()[2:])
                    continue
                if line.startswith("#") or not line.strip():
                    continue
                rtype, fid, val = line.rstrip("\n").split("\t")
                by_type.setdefault(rtype, {})[int(fid)] = float(val)
        return cls(by_type, frozenset(known))


def learn_weights(train, l2: float = 1e-4, epochs: int = 50, lr: float = 0.1, seed: int = 0,
                  n_features: int | None = None) -> Weights:
    """Fit one logistic weight vector per relation type from resolved labels.

    ``train`` is an iterable of LabeledCandidate with ``resolved`` in {True, False}.
    """
    by_type: dict[str, list] = {}
    for lc in train:
        if lc.resolved is None:
            raise ValueError(f"candidate {lc.candidate.candidate_id} is unlabeled")
        by_type.setdefault(lc.candidate.rtype, []).append(lc)
    if not by_type:
        raise ValueError("empty training set")
    known: set[int] = set()
    out: dict[str, dict[int, float]] = {}
    for rtype in sorted(by_type):
        items = by_type[rtype]
        feats = [lc.candidate.features for lc in items]
        known.update(f for fs in feats for f in fs)
        d = n_features if n_features is not None else 1 + max((max(fs) for fs in feats if fs), default=-1)
        X = design_matrix(feats, max(d, 1))
        y = np.array([1.0 if lc.resolved else 0.0 for lc in items])
        w = sgd_fit(X, y, l2=l2, epochs=epochs, lr=lr, seed=seed)
        out[rtype] = {int(i): float(w[i]) for i in np.flatnonzero(w)}
    return Weights(out, frozenset(known))


# ---------------------------------------------------------------- corpus inference


def build_corpus_graph(candidates, weights: Weights, coupling: bool = False, rho: float = 1.5):
    """Factor graph over candidates (plus role variables when ``coupling`` is on).

    Returns (graph, n_candidate_vars). Role variables carry no unary evidence;
    each Actor endpoint contributes ``candidate => role(entity)``.
    """
    rtypes = sorted({c.rtype for c in candidates})
    fmax = 1 + max((max(c.features) for c in candidates if c.features), default=-1)
    # one weight block per relation type so variables see their own type's weights
    offsets = {rt: i * max(fmax, 1) for i, rt in enumerate(rtypes)}
    table = np.zeros(max(fmax, 1) * max(len(rtypes), 1))
    for rt in rtypes:
        table[offsets[rt]:offsets[rt] + max(fmax, 1)] = weights.vector(rt, max(fmax, 1))
    unary = [np.array(sorted(c.features), dtype=np.int64) + offsets[c.rtype] for c in candidates]
    couplings: list[tuple[int, int]] = []
    if coupling:
        from .candidates import RELATIONS

        role_var: dict[tuple[str, str], int] = {}
        for i, c in enumerate(candidates):
            rt = RELATIONS[c.rtype]
            for m, (etype, role) in ((c.left, rt.left_spec), (c.right, rt.right_spec)):
                if etype == "Actor" and role is not None:
                    key = (m.entity_id, role)
                    if key not in role_var:
                        role_var[key] = len(candidates) + len(role_var)
                    couplings.append((i, role_var[key]))
        unary = unary + [np.zeros(0, dtype=np.int64)] * len(role_var)
    graph = FactorGraph(unary, table, couplings, np.full(len(couplings), rho))
    return graph, len(candidates)


def infer_corpus(candidates, weights: Weights, mode: str = "exact-unary", n_samples: int = 10_000,
                 burn_in: int | None = None, seed: int = 0, coupling: bool = False,
                 rho: float = 1.5) -> list[Marginal]:
    dropped = sum(1 for c in candidates for f in c.features if weights.known and f not in weights.known)
    if dropped:
        log.info("dropped %d feature occurrences unseen in training", dropped)
    if mode == "exact-unary":
        if coupling:
            raise ValueError("exact-unary inference does not support coupling factors")
        probs = sigmoid([weights.score(c.rtype, c.features) for c in candidates])
        return [Marginal(c.candidate_id, float(p), 0, seed) for c, p in zip(candidates, probs)]
    if mode != "gibbs":
        raise ValueError(f"unknown inference mode {mode!r}")
    burn = burn_in if burn_in is not None else n_samples // 10
    out: list[Marginal] = []
    # unary-only graphs factorise per relation type; run one chain per type
    groups: dict[str, list] = {}
    for c in candidates:
        groups.setdefault("all" if coupling else c.rtype, []).append(c)
    probs_by_id: dict[str, float] = {}
    for key in sorted(groups):
        cands = groups[key]
        graph, k = build_corpus_graph(cands, weights, coupling, rho)
        probs = gibbs_probabilities(graph, n_samples, burn, seed)
        for c, p in zip(cands, probs[:k]):
            probs_by_id[c.candidate_id] = float(p)
    return [Marginal(c.candidate_id, probs_by_id[c.candidate_id], n_samples, seed) for c in candidates]
