import json
import shutil

import pytest

from kgforge.cli import main
from kgforge.config import load_config
from kgforge.pipeline import STAGES, Pipeline, StageError
from kgforge.synth import SynthSpec, generate_synthetic, write_synthetic


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth200")
    out = generate_synthetic(SynthSpec(n_documents=200, db_coverage=0.5), seed=0)
    write_synthetic(out, d, meta={"seed": 0})
    return d


def _config(corpus_dir, out_dir, *extra, env=None):
    overrides = [f"paths.corpus={corpus_dir / 'corpus.jsonl'}", f"paths.gold={corpus_dir / 'gold.jsonl'}",
                 f"paths.piracy_db={corpus_dir / 'piracy.csv'}", f"paths.maritime_db={corpus_dir / 'maritime.csv'}",
                 f"paths.output_dir={out_dir}", "learn.epochs=20", *extra]
    return load_config(overrides=overrides, env=env or {})


@pytest.fixture(scope="module")
def finished_run(corpus_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    pipe = Pipeline(_config(corpus_dir, out))
    results = pipe.run()
    return out, results


def test_full_run_writes_artifacts(finished_run):
    out, results = finished_run
    assert [r.stage for r in results] == list(STAGES)
    assert all(r.status == "ran" for r in results)
    for name in ("metrics.csv", "calibration.csv", "kg.jsonl", "kg.tsv", "marginals.jsonl", "manifest.json"):
        assert (out / name).stat().st_size > 0
    rows = (out / "metrics.csv").read_text().splitlines()
    assert rows[-1].startswith("Average,")
    assert len(rows) == 2 + 8 + 1


def test_artifacts_embed_config_hash_and_seeds(finished_run, corpus_dir):
    out, _ = finished_run
    pipe = Pipeline(_config(corpus_dir, out))
    header = json.loads((out / "kg.jsonl").read_text().splitlines()[0])["_meta"]
    assert header["config"] == pipe.config_hash()
    assert header["seeds"] == pipe.cfg.seeds()
    for name in ("metrics.csv", "calibration.csv", "kg.tsv", "weights.tsv"):
        assert pipe.config_hash() in (out / name).read_text().splitlines()[0]


def test_rerun_skips_everything(finished_run, corpus_dir):
    out, _ = finished_run
    results = Pipeline(_config(corpus_dir, out)).run()
    assert {r.status for r in results} == {"skipped"}


def test_changed_supervision_rules_rerun_downstream_only(finished_run, corpus_dir, tmp_path):
    src, _ = finished_run
    out = tmp_path / "copy"
    shutil.copytree(src, out)
    from importlib import resources

    text = (resources.files("kgforge") / "data" / "rules.toml").read_text()
    rules = tmp_path / "rules.toml"
    # roles and aliases stay default, so only supervision sees a change
    rules.write_text(text + "\n[supervision]\nwindow = 5\n")
    cfg = _config(corpus_dir, out, f"paths.rules={rules}")
    base = Pipeline(_config(corpus_dir, out))
    changed = Pipeline(cfg)
    assert changed.stage_key("extract") == base.stage_key("extract")
    status = {r.stage: r.status for r in changed.run()}
    assert [status[s] for s in ("ingest", "annotate", "extract")] == ["skipped"] * 3
    assert [status[s] for s in ("supervise", "learn", "infer", "eval", "calibrate", "export")] == ["ran"] * 6


def test_missing_corpus_is_tagged_ingest_error(tmp_path, capsys):
    code = main(["run", "--set", f"paths.corpus={tmp_path / 'nope.jsonl'}", "--set", f"paths.output_dir={tmp_path}"])
    assert code == 1
    assert "[ingest]" in capsys.readouterr().err
    with pytest.raises(StageError, match=r"^\[ingest\]"):
        Pipeline(load_config(overrides=[f"paths.corpus={tmp_path / 'nope.jsonl'}"], env={})).run("ingest")


def test_bad_config_exit_code(capsys):
    assert main(["run", "--set", "learn.nosuch=1"]) == 2
    assert "[config]" in capsys.readouterr().err


def test_ablation_with_empty_database(tmp_path, caplog):
    empty = tmp_path / "empty"
    write_synthetic(generate_synthetic(SynthSpec(n_documents=200, db_coverage=0.0), seed=0), empty)
    pipe = Pipeline(_config(empty, tmp_path / "run"))
    with caplog.at_level("WARNING"):
        table = pipe.run_ablation()
    assert all(v == 0.0 for v in table["db-only"].values())
    assert any("db-only" in r.message and "abstained" in r.message for r in caplog.records)
    assert table["rules-only"] == table["both"]
    assert (tmp_path / "run" / "ablation.csv").exists()


def test_cli_synth_and_run(tmp_path, capsys):
    d = tmp_path / "gen"
    assert main(["synth", "--out", str(d), "--set", "synth.n_documents=60", "--set", "synth.seed=2"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["documents"] == 60 and report["mention_recovery"] >= 0.99
    cfg = d / "pipeline.toml"
    assert main(["run", "--config", str(cfg), "--set", "learn.epochs=5"]) == 0
    printed = capsys.readouterr().out.split()
    assert printed.count("ran") == len(STAGES)
    assert (d / "run" / "kg.jsonl").exists()
    assert main(["export", "--config", str(cfg), "--set", "learn.epochs=5"]) == 0
    assert "ran" not in capsys.readouterr().out.split()
