"""Attribute word-pair datasets, split manifests and non-attribute word sets."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .embeddings import EmbeddingTable, atomic_write_text
from .errors import DatasetError

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")

Pair = tuple[str, str]
Triplet = tuple[str, str, str]  # (source, target, attribute id)


@dataclass(frozen=True)
class AttributeDataset:
    attribute: str
    train_pairs: tuple[Pair, ...]
    val_pairs: tuple[Pair, ...] = ()
    test_pairs: tuple[Pair, ...] = ()

    def __post_init__(self):
        seen: dict[frozenset, str] = {}
        for split in SPLITS:
            for m, w in self.pairs(split):
                key = frozenset((m, w))
                if key in seen and seen[key] != split:
                    raise DatasetError(f"pair ({m}, {w}) is in both {seen[key]} and {split}")
                seen[key] = split

    def pairs(self, split: str) -> tuple[Pair, ...]:
        return {"train": self.train_pairs, "val": self.val_pairs, "test": self.test_pairs}[split]

    def triplets(self, split: str) -> list[Triplet]:
        """Both directions of every pair: m->w then w->m."""
        out = []
        for m, w in self.pairs(split):
            out.append((m, w, self.attribute))
            out.append((w, m, self.attribute))
        return out

    def tokens(self) -> set[str]:
        return {tok for split in SPLITS for pair in self.pairs(split) for tok in pair}

    def sizes(self) -> dict[str, int]:
        return {split: len(self.pairs(split)) for split in SPLITS}


@dataclass(frozen=True)
class NonAttributeSet:
    attribute: str
    train: tuple[str, ...] = ()
    test: tuple[str, ...] = ()


def read_pairs(path: str | os.PathLike) -> list[Pair]:
    """``source<TAB>target`` lines; blank lines and ``#`` comments ignored."""
    pairs = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2 or not all(f.strip() for f in fields):
                raise DatasetError(f"expected 'source<TAB>target' in {path}", lineno)
            m, w = fields[0].strip(), fields[1].strip()
            if m == w:
                raise DatasetError(f"pair maps {m!r} to itself", lineno)
            pairs.append((m, w))
    return pairs


def write_pairs(path: str | os.PathLike, pairs: Iterable[Pair]) -> None:
    atomic_write_text(path, "".join(f"{m}\t{w}\n" for m, w in pairs))


def read_words(path: str | os.PathLike) -> list[str]:
    with Path(path).open("r", encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]


def write_words(path: str | os.PathLike, words: Iterable[str]) -> None:
    atomic_write_text(path, "".join(f"{w}\n" for w in words))


def split_pairs(pairs: list[Pair], train: int, val: int, test: int, seed: int) -> tuple[list[Pair], ...]:
    if min(train, val, test) < 0:
        raise DatasetError("split counts must be non-negative")
    total = train + val + test
    if total > len(pairs):
        raise DatasetError(f"manifest asks for {total} pairs but only {len(pairs)} are available")
    if total < len(pairs):
        logger.warning("manifest uses %d of %d pairs", total, len(pairs))
    order = np.random.default_rng(seed).permutation(len(pairs))
    shuffled = [pairs[i] for i in order]
    return shuffled[:train], shuffled[train:train + val], shuffled[train + val:total]


def load_pairs(path: str | os.PathLike | None, manifest: Mapping, attribute: str | None = None,
               base_dir: str | os.PathLike | None = None) -> AttributeDataset:
    """Build an :class:`AttributeDataset` from a pair file and a split manifest.

    The manifest either gives counts, ``{"train": 29, "val": 12, "test": 12,
    "seed": 0}``, applied to a seeded shuffle of ``path``, or explicit files,
    ``{"files": {"train": ..., "val": ..., "test": ...}}``.
    """
    base = Path(base_dir) if base_dir is not None else Path(".")
    attribute = attribute or manifest.get("attribute") or (Path(path).stem if path else "attr")
    if "files" in manifest:
        splits = []
        for split in SPLITS:
            f = manifest["files"].get(split)
            splits.append(read_pairs(base / f) if f else [])
    else:
        if path is None:
            raise DatasetError("count-based manifest needs a pair file")
        pairs = _dedupe(read_pairs(path))
        splits = split_pairs(pairs, int(manifest.get("train", 0)), int(manifest.get("val", 0)),
                             int(manifest.get("test", 0)), int(manifest.get("seed", 0)))
    return AttributeDataset(attribute, *(tuple(s) for s in splits))


def _dedupe(pairs: list[Pair]) -> list[Pair]:
    seen, out = set(), []
    for m, w in pairs:
        key = frozenset((m, w))
        if key in seen:
            logger.warning("dropping duplicate pair (%s, %s)", m, w)
            continue
        seen.add(key)
        out.append((m, w))
    return out


def sample_non_attribute(table: EmbeddingTable, dataset: AttributeDataset, n_train: int,
                         n_test: int, seed: int) -> NonAttributeSet:
    """Uniform seeded draw of words that appear in no attribute pair."""
    if n_train < 0 or n_test < 0:
        raise ValueError("sample sizes must be non-negative")
    excluded = dataset.tokens()
    pool = [tok for tok in table.tokens if tok not in excluded]
    if len(pool) < n_train + n_test:
        raise DatasetError(f"vocabulary has {len(pool)} non-attribute words, "
                           f"need {n_train + n_test}")
    pick = np.random.default_rng(seed).choice(len(pool), size=n_train + n_test, replace=False)
    words = [pool[i] for i in pick]
    return NonAttributeSet(dataset.attribute, tuple(words[:n_train]), tuple(words[n_train:]))


def resolve_triplets(triplets, table: EmbeddingTable, strict: bool = False):
    """Split triplets into resolvable ones and a count of skipped ones."""
    ok = [t for t in triplets if t[0] in table and t[1] in table]
    skipped = len(triplets) - len(ok)
    if skipped:
        if strict:
            missing = next(t for t in triplets if t[0] not in table or t[1] not in table)
            raise DatasetError(f"unresolvable triplet {missing[:2]}")
        logger.warning("skipped %d triplets with out-of-vocabulary tokens", skipped)
    return ok, skipped
