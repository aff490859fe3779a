"""Pipeline configuration: TOML file, ``--set`` overrides, ``KGFORGE_SEED``."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SEED_ENV = "KGFORGE_SEED"


@dataclass
class PathsConfig:
    corpus: str = ""
    corpus_format: str = "annotated-jsonl"
    gold: str = ""
    places: str = ""
    actors: str = ""
    incidents: str = ""
    rules: str = ""
    piracy_db: str = ""
    maritime_db: str = ""
    output_dir: str = "out"


@dataclass
class SplitConfig:
    test_fraction: float = 0.1
    dev_fraction: float = 0.1
    test_count: int = 0  # > 0 overrides test_fraction
    seed: int = 0


@dataclass
class SupervisionConfig:
    mode: str = "both"
    coord_tolerance: float = 0.02
    balance_seed: int = 0


@dataclass
class FeaturesConfig:
    windows: list[int] = field(default_factory=lambda: [1, 2, 3])


@dataclass
class LearnConfig:
    l2: float = 1e-4
    epochs: int = 50
    lr: float = 0.1
    seed: int = 0


@dataclass
class InferenceConfig:
    mode: str = "exact-unary"
    n_samples: int = 10_000
    burn_in: int = -1  # negative: 10% of n_samples
    coupling: bool = False
    rho: float = 1.5
    seed: int = 0


@dataclass
class ExportConfig:
    min_prob: float = 0.5


@dataclass
class SynthConfig:
    n_documents: int = 200
    distractor_rate: float = 0.3
    date_clutter_rate: float = 0.4
    coref_rate: float = 0.25
    db_coverage: float = 0.5
    db_noise: float = 0.35
    seed: int = 0


@dataclass
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    supervision: SupervisionConfig = field(default_factory=SupervisionConfig)
    features: FeaturesConfig = field(default_factory=FeaturesConfig)
    learn: LearnConfig = field(default_factory=LearnConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    export: ExportConfig = field(default_factory=ExportConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def seeds(self) -> dict[str, int]:
        return {
            "split": self.split.seed,
            "balance": self.supervision.balance_seed,
            "learn": self.learn.seed,
            "inference": self.inference.seed,
            "synth": self.synth.seed,
        }

    def set_all_seeds(self, seed: int) -> None:
        self.split.seed = seed
        self.supervision.balance_seed = seed
        self.learn.seed = seed
        self.inference.seed = seed
        self.synth.seed = seed

    def validate(self) -> None:
        from .supervision import MODES

        if self.supervision.mode not in MODES:
            raise ValueError(f"supervision.mode must be one of {MODES}")
        if self.inference.mode not in ("exact-unary", "gibbs"):
            raise ValueError("inference.mode must be exact-unary or gibbs")
        if not self.features.windows or any(int(k) < 1 for k in self.features.windows):
            raise ValueError("features.windows must be positive integers")
        if not (0 < self.split.test_fraction < 1 and 0 < self.split.dev_fraction < 1):
            raise ValueError("split fractions must lie in (0, 1)")


def _coerce(current: Any, value: Any, where: str) -> Any:
    if isinstance(current, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        raise ValueError(f"{where}: expected a boolean, got {value!r}")
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    if isinstance(current, list):
        if isinstance(value, str):
            value = [v for v in value.replace("[", "").replace("]", "").split(",") if v.strip()]
        return [type(current[0])(v) if current else v for v in value]
    return str(value)


def _apply(cfg: PipelineConfig, section: str, key: str, value: Any) -> None:
    if not hasattr(cfg, section):
        raise ValueError(f"unknown config section [{section}]")
    sub = getattr(cfg, section)
    if not hasattr(sub, key):
        raise ValueError(f"unknown config key {section}.{key}")
    setattr(sub, key, _coerce(getattr(sub, key), value, f"{section}.{key}"))


def _parse_value(text: str) -> Any:
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def load_config(path: str | Path | None = None, overrides: list[str] | None = None,
                env: dict[str, str] | None = None) -> PipelineConfig:
    """Build a config from defaults, an optional TOML file and ``section.key=value`` overrides.

    Relative paths in the file resolve against the file's directory.
    """
    cfg = PipelineConfig()
    if path is not None:
        path = Path(path)
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        for section, table in raw.items():
            if not isinstance(table, dict):
                raise ValueError(f"{path}: top-level key {section!r} must be a table")
            for key, value in table.items():
                _apply(cfg, section, key, value)
        base = path.parent
        for f in dataclasses.fields(cfg.paths):
            v = getattr(cfg.paths, f.name)
            if f.name != "corpus_format" and v and not Path(v).is_absolute():
                setattr(cfg.paths, f.name, str(base / v))
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ValueError(f"override {item!r} must look like section.key=value")
        dotted, value = item.split("=", 1)
        section, key = dotted.strip().split(".", 1)
        _apply(cfg, section, key, _parse_value(value.strip()))
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        cfg.set_all_seeds(int(env[SEED_ENV]))
    cfg.validate()
    return cfg
