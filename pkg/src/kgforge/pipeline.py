"""Resumable pipeline stages with content-addressed checkpoints.

Each stage's key hashes its own parameters, the digests of the files it
reads directly, and the keys of the stages it depends on. A stage whose key
matches the manifest and whose outputs still exist is skipped.
"""
from __future__ import annotations

import contextlib
import hashlib
import json
import logging
import os
import tempfile
from collections import defaultdict
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .annotate import annotate
from .candidates import RelationCandidate, generate_all
from .config import PipelineConfig
from .corpus import Document, iter_jsonl, load_corpus, save_corpus, split_corpus
from .evaluation import (
    ScoredExample,
    ablation,
    calibration,
    evaluate_relations,
    gold_label,
    load_gold,
    write_ablation_csv,
    write_calibration_csv,
    write_curves_csv,
    write_metrics_csv,
)
from .features import FeatureDictionary, featurize
from .gazetteers import GazetteerSet, RuleConfig, alias_map
from .inference import Marginal, Weights, infer_corpus, learn_weights
from .kgraph import build_graph, save_graph_jsonl, save_graph_tsv
from .mentions import Mention, assign_roles, extract_mentions, link_entities
from .supervision import (
    LabelVote,
    SecondaryDB,
    balance_training,
    db_supervise,
    filter_votes,
    label_candidates,
    rule_supervise,
)

log = logging.getLogger(__name__)

STAGES = ("ingest", "annotate", "extract", "supervise", "learn", "infer", "eval", "calibrate", "export")
DEPENDS = {
    "ingest": (),
    "annotate": ("ingest",),
    "extract": ("annotate",),
    "supervise": ("extract",),
    "learn": ("supervise",),
    "infer": ("learn",),
    "eval": ("infer",),
    "calibrate": ("eval",),
    "export": ("infer",),
}


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: str):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage


def file_digest(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


@contextlib.contextmanager
def atomic_path(path: Path):
    """Yield a temporary sibling path that replaces ``path`` on success."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        yield Path(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_jsonl(path: Path, records, meta: dict | None = None) -> None:
    with atomic_path(path) as tmp, open(tmp, "w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write(json.dumps({"_meta": meta}, sort_keys=True) + "\n")
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def read_records(path: Path) -> list[dict]:
    return [rec for _, rec in iter_jsonl(path)]


@dataclass
class StageResult:
    stage: str
    status: str  # "ran" or "skipped"
    key: str


class Pipeline:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.paths.output_dir)
        self.manifest_path = self.out / "manifest.json"
        self.keys: dict[str, str] = {}
        self.results: list[StageResult] = []
        self._rules: RuleConfig | None = None
        self._gz: GazetteerSet | None = None

    # ------------------------------------------------------------ metadata

    @property
    def meta(self) -> dict:
        return {"config": self.config_hash(), "seeds": self.cfg.seeds()}

    @property
    def header(self) -> str:
        return json.dumps(self.meta, sort_keys=True)

    def config_hash(self) -> str:
        d = self.cfg.to_dict()
        d["paths"] = {k: v for k, v in d["paths"].items() if k != "output_dir"}
        return _hash(d)[:16]

    def rules(self) -> RuleConfig:
        if self._rules is None:
            self._rules = RuleConfig.from_toml(self.cfg.paths.rules or None)
        return self._rules

    def gazetteers(self) -> GazetteerSet:
        if self._gz is None:
            p = self.cfg.paths
            base = resources.files("kgforge") / "data"
            self._gz = GazetteerSet.from_files(
                p.places or base / "places.txt", p.actors or base / "actors.txt", p.incidents or base / "incidents.txt"
            )
        return self._gz

    def _gazetteer_digest(self) -> str:
        p = self.cfg.paths
        base = resources.files("kgforge") / "data"
        parts = []
        for given, name in ((p.places, "places.txt"), (p.actors, "actors.txt"), (p.incidents, "incidents.txt")):
            parts.append(file_digest(given) if given else hashlib.sha256((base / name).read_bytes()).hexdigest())
        return _hash(parts)

    def _stage_params(self, stage: str) -> dict:
        c = self.cfg
        if stage == "ingest":
            if not c.paths.corpus:
                raise StageError(stage, "no corpus configured (paths.corpus)")
            if not Path(c.paths.corpus).exists():
                raise StageError(stage, f"corpus file not found: {c.paths.corpus}")
            return {"corpus": file_digest(c.paths.corpus), "format": c.paths.corpus_format}
        if stage == "annotate":
            return {"gazetteers": self._gazetteer_digest()}
        if stage == "extract":
            raw = self.rules().raw
            return {"gazetteers": self._gazetteer_digest(), "roles": raw.get("roles"),
                    "aliases": raw.get("aliases"), "windows": list(c.features.windows)}
        if stage == "supervise":
            dbs = {}
            for kind, path in (("Piracy", c.paths.piracy_db), ("Maritime", c.paths.maritime_db)):
                if path:
                    if not Path(path).exists():
                        raise StageError(stage, f"secondary database not found: {path}")
                    dbs[kind] = file_digest(path)
            return {"dbs": dbs, "rules": self.rules().raw.get("supervision"), "roles": self.rules().raw.get("roles"),
                    "tolerance": c.supervision.coord_tolerance, "split": vars(c.split)}
        if stage == "learn":
            return {"mode": c.supervision.mode, "balance_seed": c.supervision.balance_seed, "learn": vars(c.learn)}
        if stage == "infer":
            return {"inference": vars(c.inference)}
        if stage == "eval":
            if not c.paths.gold:
                raise StageError(stage, "no gold labels configured (paths.gold)")
            if not Path(c.paths.gold).exists():
                raise StageError(stage, f"gold file not found: {c.paths.gold}")
            return {"gold": file_digest(c.paths.gold), "mode": c.supervision.mode}
        if stage == "calibrate":
            return {}
        if stage == "export":
            return {"min_prob": c.export.min_prob, "gazetteers": self._gazetteer_digest()}
        raise StageError(stage, "unknown stage")

    OUTPUTS = {
        "ingest": ("docs.jsonl",),
        "annotate": ("annotated.jsonl",),
        "extract": ("mentions.jsonl", "candidates.jsonl", "features.tsv"),
        "supervise": ("votes.jsonl", "split.json"),
        "learn": ("weights.tsv", "labels.jsonl"),
        "infer": ("marginals.jsonl",),
        "eval": ("metrics.csv", "curves.csv", "thresholds.json", "scored.jsonl"),
        "calibrate": ("calibration.csv",),
        "export": ("kg.jsonl", "kg.tsv"),
    }

    # ------------------------------------------------------------ driver

    def _manifest(self) -> dict:
        if self.manifest_path.exists():
            with open(self.manifest_path, encoding="utf-8") as fh:
                return json.load(fh)
        return {}

    def _save_manifest(self, manifest: dict) -> None:
        with atomic_path(self.manifest_path) as tmp, open(tmp, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)

    def stage_key(self, stage: str) -> str:
        if stage not in self.keys:
            upstream = [self.stage_key(d) for d in DEPENDS[stage]]
            self.keys[stage] = _hash({"stage": stage, "params": self._stage_params(stage), "upstream": upstream})
        return self.keys[stage]

    def run(self, target: str = "export", force: bool = False) -> list[StageResult]:
        if target not in STAGES:
            raise StageError(target, "unknown stage")
        needed: list[str] = []

        def visit(s):
            for d in DEPENDS[s]:
                visit(d)
            if s not in needed:
                needed.append(s)

        visit(target)
        if target == "export" and self.cfg.paths.gold:
            needed = [s for s in STAGES if s in needed or s in ("eval", "calibrate")]
        self.out.mkdir(parents=True, exist_ok=True)
        manifest = self._manifest()
        for stage in needed:
            key = self.stage_key(stage)
            entry = manifest.get(stage)
            outputs_ok = all((self.out / f).exists() for f in self.OUTPUTS[stage])
            if not force and entry and entry.get("key") == key and outputs_ok:
                self.results.append(StageResult(stage, "skipped", key))
                log.info("%s: up to date", stage)
                continue
            log.info("%s: running", stage)
            try:
                getattr(self, f"_run_{stage}")()
            except StageError:
                raise
            except Exception as exc:  # tag any failure with its stage
                raise StageError(stage, f"{type(exc).__name__}: {exc}") from exc
            manifest[stage] = {"key": key, "outputs": list(self.OUTPUTS[stage])}
            self._save_manifest(manifest)
            self.results.append(StageResult(stage, "ran", key))
        return self.results

    # ------------------------------------------------------------ loaders

    def load_docs(self, name: str) -> list[Document]:
        return load_corpus(self.out / name)

    def load_candidates(self) -> list[RelationCandidate]:
        out = []
        for rec in read_records(self.out / "candidates.jsonl"):
            c = RelationCandidate.from_dict(rec)
            c.features = frozenset(rec["features"])
            out.append(c)
        return out

    def load_mentions(self) -> list[Mention]:
        return [Mention.from_dict(r) for r in read_records(self.out / "mentions.jsonl")]

    def load_votes(self) -> list[LabelVote]:
        return [LabelVote(r["candidate_id"], r["source"], r["polarity"]) for r in read_records(self.out / "votes.jsonl")]

    def load_split(self) -> dict[str, str]:
        with open(self.out / "split.json", encoding="utf-8") as fh:
            d = json.load(fh)
        return {doc: part for part in ("train", "dev", "test") for doc in d[part]}

    def load_marginals(self) -> list[Marginal]:
        return [Marginal(r["candidate_id"], r["probability"], r["n_samples"], r["seed"])
                for r in read_records(self.out / "marginals.jsonl")]

    # ------------------------------------------------------------ stages

    def _run_ingest(self) -> None:
        docs = load_corpus(self.cfg.paths.corpus, self.cfg.paths.corpus_format)
        with atomic_path(self.out / "docs.jsonl") as tmp:
            save_corpus(docs, tmp, meta=self.meta)

    def _run_annotate(self) -> None:
        gz = self.gazetteers()
        docs = [d if d.is_annotated else annotate(d, gz) for d in self.load_docs("docs.jsonl")]
        with atomic_path(self.out / "annotated.jsonl") as tmp:
            save_corpus(docs, tmp, meta=self.meta)

    def _run_extract(self) -> None:
        gz, rules = self.gazetteers(), self.rules()
        aliases = alias_map(gz, rules.aliases)
        dictionary = FeatureDictionary()
        all_mentions, all_cands = [], []
        for doc in self.load_docs("annotated.jsonl"):
            ms = assign_roles(doc, link_entities(doc, extract_mentions(doc, gz), aliases), rules.roles)
            cands = generate_all(doc, ms)
            featurize(doc, cands, dictionary, self.cfg.features.windows)
            all_mentions.extend(ms)
            all_cands.extend(cands)
        write_jsonl(self.out / "mentions.jsonl", (m.to_dict() for m in all_mentions), self.meta)
        write_jsonl(self.out / "candidates.jsonl",
                    ({**c.to_dict(), "features": sorted(c.features)} for c in all_cands), self.meta)
        with atomic_path(self.out / "features.tsv") as tmp:
            dictionary.save(tmp, header=self.header)

    def _dbs(self) -> list[SecondaryDB]:
        p = self.cfg.paths
        dbs = []
        if p.piracy_db:
            dbs.append(SecondaryDB.load_csv(p.piracy_db, "Piracy"))
        if p.maritime_db:
            dbs.append(SecondaryDB.load_csv(p.maritime_db, "Maritime"))
        return dbs

    def _run_supervise(self) -> None:
        gz, rules = self.gazetteers(), self.rules()
        aliases = alias_map(gz, rules.aliases)
        dbs = self._dbs()
        docs = self.load_docs("annotated.jsonl")
        by_doc_m: dict[str, list[Mention]] = defaultdict(list)
        for m in self.load_mentions():
            by_doc_m[m.doc_id].append(m)
        by_doc_c: dict[str, list[RelationCandidate]] = defaultdict(list)
        for c in self.load_candidates():
            by_doc_c[c.doc_id].append(c)
        votes: list[LabelVote] = []
        for doc in docs:
            ms, cs = by_doc_m.get(doc.doc_id, []), by_doc_c.get(doc.doc_id, [])
            if dbs:
                votes.extend(db_supervise(doc, ms, cs, dbs, aliases, self.cfg.supervision.coord_tolerance))
            votes.extend(rule_supervise(doc, ms, cs, rules.supervision))
        write_jsonl(self.out / "votes.jsonl", (v.to_dict() for v in votes), self.meta)
        s = self.cfg.split
        split = split_corpus(docs, s.test_fraction, s.dev_fraction, s.seed, s.test_count or None)
        with atomic_path(self.out / "split.json") as tmp, open(tmp, "w", encoding="utf-8") as fh:
            json.dump({"_meta": self.meta, "train": list(split.train_ids), "dev": list(split.dev_ids),
                       "test": list(split.test_ids)}, fh, indent=1, sort_keys=True)

    def _labeled(self, part: str) -> list:
        split = self.load_split()
        cands = [c for c in self.load_candidates() if split.get(c.doc_id) == part]
        return label_candidates(cands, filter_votes(self.load_votes(), self.cfg.supervision.mode))

    def _run_learn(self) -> None:
        labeled = self._labeled("train")
        train = balance_training(labeled, self.cfg.supervision.balance_seed)
        if not train:
            raise StageError("learn", f"no resolved training labels under supervision mode {self.cfg.supervision.mode}")
        lc = self.cfg.learn
        weights = learn_weights(train, l2=lc.l2, epochs=lc.epochs, lr=lc.lr, seed=lc.seed)
        with atomic_path(self.out / "weights.tsv") as tmp:
            weights.save(tmp, header=self.header)
        used = {lc_.candidate.candidate_id for lc_ in train}
        write_jsonl(self.out / "labels.jsonl",
                    ({"candidate_id": x.candidate.candidate_id, "resolved": x.resolved, "n_votes": len(x.votes),
                      "in_training": x.candidate.candidate_id in used} for x in labeled), self.meta)

    def _run_infer(self) -> None:
        ic = self.cfg.inference
        weights = Weights.load(self.out / "weights.tsv")
        burn = None if ic.burn_in < 0 else ic.burn_in
        marg = infer_corpus(self.load_candidates(), weights, ic.mode, ic.n_samples, burn, ic.seed, ic.coupling, ic.rho)
        write_jsonl(self.out / "marginals.jsonl", (m.to_dict() for m in marg), self.meta)

    def _scored_sets(self):
        """(test by type, validation by type, dev scored with gold, all probabilities)."""
        labels, gold_docs = load_gold(self.cfg.paths.gold)
        split = self.load_split()
        probs = {m.candidate_id: m.probability for m in self.load_marginals()}
        resolved = {x.candidate.candidate_id: x.resolved for x in self._labeled("dev")}
        test: dict[str, list[ScoredExample]] = defaultdict(list)
        val: dict[str, list[ScoredExample]] = defaultdict(list)
        dev_gold: list[ScoredExample] = []
        for c in self.load_candidates():
            part = split.get(c.doc_id)
            g = gold_label(c, labels, gold_docs)
            p = probs[c.candidate_id]
            if part == "test" and g is not None:
                test[c.rtype].append(ScoredExample(c.candidate_id, p, g))
            elif part == "dev":
                # dev gold when annotated, otherwise the resolved distant label (abstains excluded)
                y = g if g is not None else resolved.get(c.candidate_id)
                if y is not None:
                    val[c.rtype].append(ScoredExample(c.candidate_id, p, y))
                if g is not None:
                    dev_gold.append(ScoredExample(c.candidate_id, p, g))
        return test, val, dev_gold, [probs[k] for k in sorted(probs)]

    def _run_eval(self) -> None:
        test, val, _, _ = self._scored_sets()
        if not test:
            raise StageError("eval", "no gold-labelled test candidates")
        metrics = evaluate_relations(test, val)
        with atomic_path(self.out / "metrics.csv") as tmp:
            write_metrics_csv(metrics, tmp, header=self.header)
        with atomic_path(self.out / "curves.csv") as tmp:
            write_curves_csv(test, tmp, header=self.header)
        with atomic_path(self.out / "thresholds.json") as tmp, open(tmp, "w", encoding="utf-8") as fh:
            json.dump({"_meta": self.meta, **{m.relation: m.threshold for m in metrics}}, fh, indent=1, sort_keys=True)
        write_jsonl(self.out / "scored.jsonl",
                    ({"candidate_id": s.candidate_id, "probability": s.probability, "gold": s.gold}
                     for r in sorted(test) for s in test[r]), self.meta)

    def _run_calibrate(self) -> None:
        _, _, dev_gold, all_probs = self._scored_sets()
        report = calibration(dev_gold, all_probs)
        with atomic_path(self.out / "calibration.csv") as tmp:
            write_calibration_csv(report, tmp, header=self.header)

    def _run_export(self) -> None:
        graph = build_graph(self.load_marginals(), self.load_candidates(), self.load_mentions(),
                            self.cfg.export.min_prob, self.gazetteers())
        with atomic_path(self.out / "kg.jsonl") as tmp:
            save_graph_jsonl(graph, tmp, meta=self.meta)
        with atomic_path(self.out / "kg.tsv") as tmp:
            save_graph_tsv(graph, tmp, header=self.header)

    # ------------------------------------------------------------ ablation

    def run_ablation(self, modes=("db-only", "rules-only", "both")) -> dict[str, dict[str, float]]:
        """Retrain under each supervision mode and score the test split; writes ablation.csv."""
        self.run("supervise")
        if not self.cfg.paths.gold:
            raise StageError("eval", "no gold labels configured (paths.gold)")
        labels, gold_docs = load_gold(self.cfg.paths.gold)
        split = self.load_split()
        cands = self.load_candidates()
        gold = {c.candidate_id: bool(gold_label(c, labels, gold_docs)) for c in cands}
        lc = self.cfg.learn
        res = ablation(
            [c for c in cands if split.get(c.doc_id) == "train"],
            self.load_votes(),
            [c for c in cands if split.get(c.doc_id) == "test"],
            [c for c in cands if split.get(c.doc_id) == "dev"],
            gold, modes, lc.l2, lc.epochs, lc.lr, lc.seed,
        )
        with atomic_path(self.out / "ablation.csv") as tmp:
            write_ablation_csv(res.f1, tmp, header=self.header)
        for mode, flags in res.flags.items():
            for f in flags:
                log.warning("ablation %s: %s", mode, f)
        return res.f1


def run_pipeline(cfg: PipelineConfig, target: str = "export", force: bool = False) -> Pipeline:
    p = Pipeline(cfg)
    p.run(target, force)
    return p


def synth_config_text(paths: dict[str, Path], output_dir: str = "run") -> str:
    """A ready-to-run pipeline config for a generated corpus directory."""
    return (
        "[paths]\n"
        f'corpus = "{paths["corpus"].name}"\n'
        f'gold = "{paths["gold"].name}"\n'
        f'piracy_db = "{paths["piracy"].name}"\n'
        f'maritime_db = "{paths["maritime"].name}"\n'
        f'output_dir = "{output_dir}"\n'
    )

