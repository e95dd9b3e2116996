"""Planted-mirror synthetic embeddings for checking transfer models end to end.

Geometry: an orthonormal frame is drawn once. Cluster ``i`` is centred on
``center_scale * e_i`` and owns the mirror with normal ``e_{k+i}`` through
that centre. Base points are drawn around the centre inside the subspace
orthogonal to every normal, so they lie on all mirrors at once. An attribute
pair is ``(p + h a_i, reflect(p + h a_i) + noise)``; non-attribute words sit
on the mirror (plus optional jitter along the normal); distractor words are
unstructured Gaussian padding.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import AttributeDataset, NonAttributeSet, split_pairs, write_pairs, write_words
from .embeddings import EmbeddingTable, atomic_write_text, save_subset
from .reflection import Mirror, reflect


@dataclass(frozen=True)
class SyntheticSpec:
    dim: int = 20
    n_pairs: int = 60
    clusters: int = 1
    noise: float = 0.0
    n_distractors: int = 200
    nonattr_train: int = 10
    nonattr_test: int = 200
    jitter: float = 0.0
    offset_min: float = 0.5
    offset_max: float = 1.5
    center_scale: float = 3.0
    spread: float = 1.0
    nonattr_spread: float | None = None
    split: tuple[int, int, int] | None = None
    seed: int = 0
    attribute: str = "synthetic"

    def __post_init__(self):
        if self.clusters < 1:
            raise ValueError("need at least one cluster")
        if self.dim < 2 * self.clusters + 1:
            raise ValueError(f"dim {self.dim} too small for {self.clusters} clusters "
                             f"(need >= {2 * self.clusters + 1})")
        if self.noise < 0 or self.jitter < 0 or self.spread <= 0:
            raise ValueError("noise and jitter must be >= 0, spread > 0")
        if not 0 < self.offset_min <= self.offset_max:
            raise ValueError("need 0 < offset_min <= offset_max (pairs must straddle the mirror)")
        if self.n_pairs < 1 or min(self.n_distractors, self.nonattr_train, self.nonattr_test) < 0:
            raise ValueError("counts must be non-negative and n_pairs >= 1")
        if self.split is not None:
            object.__setattr__(self, "split", tuple(int(s) for s in self.split))
            if sum(self.split) > self.n_pairs:
                raise ValueError("split counts exceed n_pairs")

    def split_counts(self) -> tuple[int, int, int]:
        if self.split is not None:
            return self.split
        n_val = n_test = self.n_pairs // 5
        return self.n_pairs - n_val - n_test, n_val, n_test

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        if d.get("split") is not None:
            d["split"] = tuple(d["split"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["split"] = list(self.split_counts())
        return d


@dataclass
class SyntheticData:
    table: EmbeddingTable
    dataset: AttributeDataset
    nonattr: NonAttributeSet
    mirrors: list[Mirror]
    pair_cluster: dict[tuple[str, str], int]
    word_cluster: dict[str, int]


def synth_generate(spec: SyntheticSpec) -> SyntheticData:
    rng = np.random.default_rng(spec.seed)
    d, k = spec.dim, spec.clusters
    frame, _ = np.linalg.qr(rng.standard_normal((d, d)))
    frame = frame.T  # rows are orthonormal
    centers = spec.center_scale * frame[:k]
    normals = frame[k:2 * k]
    mirrors = [Mirror(normals[i].copy(), centers[i].copy()) for i in range(k)]
    proj = np.eye(d) - normals.T @ normals  # onto the subspace shared by all mirrors

    def base_point(i, spread=spec.spread):
        return centers[i] + spread * (proj @ rng.standard_normal(d))

    tokens: list[str] = []
    vectors: list[np.ndarray] = []
    pairs: list[tuple[str, str]] = []
    pair_cluster: dict[tuple[str, str], int] = {}
    word_cluster: dict[str, int] = {}

    for j in range(spec.n_pairs):
        i = j % k
        h = rng.uniform(spec.offset_min, spec.offset_max)
        v_m = base_point(i) + h * normals[i]
        v_w = reflect(mirrors[i], v_m)
        if spec.noise > 0:
            v_w = v_w + spec.noise * rng.standard_normal(d)
        m, w = f"m{j:04d}", f"f{j:04d}"
        tokens += [m, w]
        vectors += [v_m, v_w]
        pairs.append((m, w))
        pair_cluster[(m, w)] = i
        word_cluster[m] = word_cluster[w] = i

    n_non = spec.nonattr_train + spec.nonattr_test
    non_words = []
    for j in range(n_non):
        i = j % k
        v = base_point(i, spec.spread if spec.nonattr_spread is None else spec.nonattr_spread)
        if spec.jitter > 0:
            v = v + spec.jitter * rng.standard_normal() * normals[i]
        name = f"n{j:04d}"
        non_words.append(name)
        tokens.append(name)
        vectors.append(v)
        word_cluster[name] = i

    for j in range(spec.n_distractors):
        tokens.append(f"d{j:04d}")
        vectors.append(spec.spread * rng.standard_normal(d) * np.sqrt(1.0 + spec.center_scale ** 2 / d))

    table = EmbeddingTable(tuple(tokens), np.array(vectors))
    tr, va, te = split_pairs(pairs, *spec.split_counts(), seed=spec.seed)
    dataset = AttributeDataset(spec.attribute, tuple(tr), tuple(va), tuple(te))
    nonattr = NonAttributeSet(spec.attribute, tuple(non_words[:spec.nonattr_train]),
                              tuple(non_words[spec.nonattr_train:]))
    return SyntheticData(table, dataset, nonattr, mirrors, pair_cluster, word_cluster)


def single_mirror_residual(pairs, table: EmbeddingTable) -> float:
    """Least-squares residual of fitting one reflection direction to all pair differences.

    A single mirror maps ``v_m`` to ``v_w`` only if every difference is parallel
    to its normal; the residual is the energy left after the best rank-one
    direction, i.e. the sum of squared trailing singular values.
    """
    diffs = np.array([table.vectors[table.index(m)] - table.vectors[table.index(w)]
                      for m, w in pairs])
    s = np.linalg.svd(diffs, compute_uv=False)
    return float(np.sum(s[1:] ** 2))


def write_synthetic(data: SyntheticData, spec: SyntheticSpec, out_dir: str | os.PathLike) -> dict:
    """Write embeddings, split pair files, word lists and the planted mirrors.

    Returns a manifest dict (also written as ``manifest.json``) with relative paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_subset(data.table, out / "embeddings.txt")
    all_pairs = [p for s in ("train", "val", "test") for p in data.dataset.pairs(s)]
    write_pairs(out / "pairs.tsv", all_pairs)
    for split in ("train", "val", "test"):
        write_pairs(out / f"pairs_{split}.tsv", data.dataset.pairs(split))
    write_words(out / "nonattr_train.txt", data.nonattr.train)
    write_words(out / "nonattr_test.txt", data.nonattr.test)
    mirrors = [{"normal": m.normal.tolist(), "point": m.point.tolist()} for m in data.mirrors]
    atomic_write_text(out / "mirrors.json", json.dumps(mirrors, indent=1) + "\n")
    manifest = {
        "attribute": spec.attribute,
        "embeddings": "embeddings.txt",
        "pairs": "pairs.tsv",
        "split": {"files": {s: f"pairs_{s}.tsv" for s in ("train", "val", "test")}},
        "nonattr": {"train": "nonattr_train.txt", "test": "nonattr_test.txt"},
        "mirrors": "mirrors.json",
        "spec": spec.to_dict(),
    }
    atomic_write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
