"""Run configuration: a JSON document naming data, model kind and training knobs.

Relative paths are resolved against the config file's directory, and the
resolved form (absolute paths, every default filled in) is what gets written
next to a run's outputs.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .baselines import ANALOGY_KINDS
from .data import AttributeDataset, NonAttributeSet, load_pairs, read_words, sample_non_attribute
from .embeddings import EmbeddingTable, load_embeddings
from .errors import DatasetError
from .synth import SyntheticSpec, synth_generate
from .training import TrainConfig

MODEL_KINDS = ("ref", "refpm", "mlp", *ANALOGY_KINDS)

# Adam step size per dataset name; anything unlisted gets the default.
DEFAULT_ALPHA = 1e-4
DATASET_ALPHA = {"an": 1.5e-3, "antonym": 1.5e-3}


class ConfigError(DatasetError):
    pass


@dataclass
class RunConfig:
    attribute: str = "attribute"
    model: str = "refpm"
    embeddings: dict | None = None  # {"path": ..., "limit": ...}
    pairs: dict | None = None  # {"path": ..., "split": {...}}
    nonattr: dict = field(default_factory=lambda: {"n_train": 10, "n_test": 1000, "seed": 0})
    synthetic: dict | None = None
    train: dict = field(default_factory=dict)
    output_dir: str = "runs"
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"model must be one of {', '.join(MODEL_KINDS)}; got {self.model!r}")
        if self.synthetic is None and (self.embeddings is None or self.pairs is None):
            raise ConfigError("config needs either 'synthetic' or both 'embeddings' and 'pairs'")

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str | os.PathLike = ".") -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = cls(**{k: v for k, v in doc.items()})
        cfg._absolutize(Path(base_dir))
        return cfg

    @classmethod
    def load(cls, path: str | os.PathLike) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(doc, path.parent)

    def _absolutize(self, base: Path) -> None:
        def fix(p):
            return str((base / p).resolve()) if p is not None else None

        if self.embeddings is not None:
            self.embeddings = {**self.embeddings, "path": fix(self.embeddings["path"])}
        if self.pairs is not None:
            pairs = dict(self.pairs)
            if pairs.get("path") is not None:
                pairs["path"] = fix(pairs["path"])
            split = dict(pairs.get("split", {}))
            if "files" in split:
                split["files"] = {k: fix(v) for k, v in split["files"].items() if v}
            pairs["split"] = split
            self.pairs = pairs
        if "train" in self.nonattr and isinstance(self.nonattr["train"], str):
            self.nonattr = {**self.nonattr, "train": fix(self.nonattr["train"]),
                            "test": fix(self.nonattr.get("test"))}
        self.output_dir = fix(self.output_dir)

    def train_config(self) -> TrainConfig:
        knobs = dict(self.train)
        knobs.setdefault("alpha", DATASET_ALPHA.get(self.attribute.lower(), DEFAULT_ALPHA))
        knobs.setdefault("seed", self.seed)
        if "n_train" in self.nonattr:
            knobs.setdefault("n_train_size", int(self.nonattr["n_train"]))
        kind = self.model if self.model in ("ref", "refpm", "mlp") else "refpm"
        try:
            return TrainConfig(model_kind=kind, **knobs)
        except TypeError as exc:
            raise ConfigError(f"bad train settings: {exc}") from None

    def resolved(self) -> dict:
        doc = {f.name: getattr(self, f.name) for f in fields(self)}
        doc["train"] = self.train_config().to_dict()
        doc["train"].pop("model_kind")
        if self.synthetic is not None:
            doc["synthetic"] = SyntheticSpec.from_dict(self.synthetic).to_dict()
        return doc


@dataclass
class LoadedData:
    table: EmbeddingTable
    dataset: AttributeDataset
    nonattr: NonAttributeSet


def load_data(cfg: RunConfig) -> LoadedData:
    """Materialise the embedding table, pair splits and non-attribute words."""
    if cfg.synthetic is not None:
        spec = SyntheticSpec.from_dict({"attribute": cfg.attribute, **cfg.synthetic})
        data = synth_generate(spec)
        return LoadedData(data.table, data.dataset, data.nonattr)

    emb_path = cfg.embeddings["path"]
    if not Path(emb_path).exists():
        raise FileNotFoundError(f"embedding file not found: {emb_path}")
    table = load_embeddings(emb_path, cfg.embeddings.get("limit"))
    pair_path = cfg.pairs.get("path")
    if pair_path is not None and not Path(pair_path).exists():
        raise FileNotFoundError(f"pair file not found: {pair_path}")
    dataset = load_pairs(pair_path, cfg.pairs.get("split", {}), attribute=cfg.attribute)

    na = cfg.nonattr
    if isinstance(na.get("train"), str) or isinstance(na.get("test"), str):
        nonattr = NonAttributeSet(cfg.attribute,
                                  tuple(read_words(na["train"])) if na.get("train") else (),
                                  tuple(read_words(na["test"])) if na.get("test") else ())
    else:
        nonattr = sample_non_attribute(table, dataset, int(na.get("n_train", 10)),
                                       int(na.get("n_test", 1000)), int(na.get("seed", cfg.seed)))
    return LoadedData(table, dataset, nonattr)


def dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
