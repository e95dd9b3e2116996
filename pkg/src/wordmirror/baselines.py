"""Analogy (difference-vector) baselines and the direct MLP transfer baseline."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .embeddings import EmbeddingTable, nearest_indices
from .errors import DatasetError, KnowledgeRequiredError
from .nn import MlpParams, init_params, mlp_backward, mlp_forward
from .reflection import AttributeVector

logger = logging.getLogger(__name__)

SIDES = ("M", "F")


class KnowledgeTable(dict):
    """token -> "M" | "F"; tokens absent from the table have no side."""

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[str, str]]) -> "KnowledgeTable":
        kt = cls()
        for m, w in pairs:
            for tok, side in ((m, "M"), (w, "F")):
                if kt.get(tok, side) != side:
                    raise DatasetError(f"token {tok!r} appears on both sides of the pair list")
                kt[tok] = side
        return kt

    def side(self, token: str) -> str | None:
        return self.get(token)


@dataclass(frozen=True)
class DifferenceVector:
    d: np.ndarray
    source_pair: tuple[str, str] | None = None


def analogy_transfer(v_x: np.ndarray, d: DifferenceVector | np.ndarray, side: str | None) -> np.ndarray:
    """Subtract ``d`` from M-side words and add it to F-side words."""
    dv = d.d if isinstance(d, DifferenceVector) else np.asarray(d, dtype=np.float64)
    if side == "M":
        return np.asarray(v_x, dtype=np.float64) - dv
    if side == "F":
        return np.asarray(v_x, dtype=np.float64) + dv
    raise KnowledgeRequiredError("analogy transfer needs the word's attribute side (M or F)")


def analogy_transfer_fixed(v_x: np.ndarray, d: DifferenceVector | np.ndarray, sign: str) -> np.ndarray:
    dv = d.d if isinstance(d, DifferenceVector) else np.asarray(d, dtype=np.float64)
    if sign == "+":
        return np.asarray(v_x, dtype=np.float64) + dv
    if sign == "-":
        return np.asarray(v_x, dtype=np.float64) - dv
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def _resolvable(pairs, table: EmbeddingTable, what: str) -> list[tuple[str, str]]:
    ok = [(m, w) for m, w in pairs if m in table and w in table]
    if len(ok) < len(pairs):
        logger.warning("%s: skipped %d of %d pairs with out-of-vocabulary tokens",
                       what, len(pairs) - len(ok), len(pairs))
    return ok


def select_diff(train_pairs, val_pairs, table: EmbeddingTable,
                knowledge: Mapping[str, str]) -> DifferenceVector:
    """Pick the training-pair difference with the best knowledge-based val accuracy.

    Validation runs both directions of every pair. Ties keep the earliest pair.
    """
    train = _resolvable(list(train_pairs), table, "select_diff/train")
    if not train:
        raise DatasetError("no resolvable training pair for difference vector selection")
    val = _resolvable(list(val_pairs), table, "select_diff/val")
    sources, targets, signs = [], [], []
    for m, w in val:
        for x, t in ((m, w), (w, m)):
            side = knowledge.get(x)
            if side not in SIDES:
                continue
            sources.append(table.index(x))
            targets.append(table.index(t))
            signs.append(-1.0 if side == "M" else 1.0)
    if not sources:
        return DifferenceVector(_diff(table, *train[0]), train[0])

    vx = table.vectors[sources]
    tgt = np.asarray(targets)
    sgn = np.asarray(signs)[:, None]
    scores = []
    for m, w in train:
        y = vx + sgn * _diff(table, m, w)
        ok = np.linalg.norm(y, axis=1) > 0
        hits = np.zeros(len(y), dtype=bool)
        if np.any(ok):
            idx, _ = nearest_indices(table, y[ok])
            hits[ok] = idx == tgt[ok]
        scores.append(int(hits.sum()))
    best = int(np.argmax(scores))  # first maximum
    return DifferenceVector(_diff(table, *train[best]), train[best])


def _diff(table: EmbeddingTable, m: str, w: str) -> np.ndarray:
    return table.vectors[table.index(m)] - table.vectors[table.index(w)]


def mean_diff(train_pairs, table: EmbeddingTable) -> DifferenceVector:
    """Mean of ``v_m - v_w`` over resolvable pairs, order-independent to the last bit."""
    pairs = _resolvable(list(train_pairs), table, "mean_diff")
    if not pairs:
        raise DatasetError("no resolvable pair for the mean difference vector")
    diffs = np.array([_diff(table, m, w) for m, w in pairs])
    n = len(pairs)
    return DifferenceVector(np.array([math.fsum(col) / n for col in diffs.T]))


@dataclass(frozen=True)
class AnalogyModel:
    """A difference-vector baseline under one transfer regime.

    ``mode`` is ``"knowledge"`` (sign from the word's side) or ``"+"``/``"-"``.
    """

    kind: str
    diff: DifferenceVector
    mode: str
    knowledge: KnowledgeTable | None = None

    @property
    def requires_knowledge(self) -> bool:
        return self.mode == "knowledge"

    def transfer_rows(self, v: np.ndarray, tokens: Sequence[str] | None = None) -> np.ndarray:
        """Knowledge mode yields NaN rows for words with no known side."""
        v = np.atleast_2d(np.asarray(v, dtype=np.float64))
        if self.mode in ("+", "-"):
            return analogy_transfer_fixed(v, self.diff, self.mode)
        if tokens is None or self.knowledge is None:
            raise KnowledgeRequiredError("knowledge-based transfer needs tokens and a knowledge table")
        out = np.full_like(v, np.nan)
        for i, tok in enumerate(tokens):
            side = self.knowledge.get(tok)
            if side in SIDES:
                out[i] = analogy_transfer(v[i], self.diff, side)
        return out


ANALOGY_KINDS = {
    "diff": "knowledge", "diff+": "+", "diff-": "-",
    "meandiff": "knowledge", "meandiff+": "+", "meandiff-": "-",
}


def fit_analogy(kind: str, train_pairs, val_pairs, table: EmbeddingTable) -> AnalogyModel:
    if kind not in ANALOGY_KINDS:
        raise ValueError(f"unknown analogy baseline {kind!r}")
    knowledge = KnowledgeTable.from_pairs(list(train_pairs) + list(val_pairs))
    if kind.startswith("meandiff"):
        d = mean_diff(train_pairs, table)
    else:
        d = select_diff(train_pairs, val_pairs, table, knowledge)
    return AnalogyModel(kind, d, ANALOGY_KINDS[kind], knowledge)


@dataclass(frozen=True)
class MlpTransferModel:
    """Direct mapping ``v_y = MLP([v_x ; z])``."""

    attribute: AttributeVector
    mlp: MlpParams

    kind = "mlp"
    requires_knowledge = False

    def __post_init__(self):
        d = self.dim
        if self.mlp.in_dim != 2 * d or self.mlp.out_dim != d:
            raise ValueError(f"MLP maps {self.mlp.in_dim}->{self.mlp.out_dim}, expected {2 * d}->{d}")

    @property
    def dim(self) -> int:
        return self.attribute.z.shape[0]

    @classmethod
    def create(cls, attribute: AttributeVector, seed: int,
               hidden: Sequence[int] = (300, 300)) -> "MlpTransferModel":
        d = attribute.z.shape[0]
        return cls(attribute, init_params(seed, [2 * d, *hidden, d]))

    def _inputs(self, v):
        z = self.attribute.z
        return np.hstack([v, np.broadcast_to(z, (len(v), len(z)))])

    def transfer_rows(self, v: np.ndarray, tokens=None) -> np.ndarray:
        v = np.atleast_2d(np.asarray(v, dtype=np.float64))
        y, _ = mlp_forward(self.mlp, self._inputs(v))
        return y

    def parameters(self) -> list[np.ndarray]:
        out = self.mlp.arrays()
        if self.attribute.trainable:
            out.append(self.attribute.z)
        return out

    def with_parameters(self, arrays):
        n = len(self.mlp.arrays())
        attr = self.attribute
        if attr.trainable:
            attr = AttributeVector(attr.id, arrays[n], True)
        return MlpTransferModel(attr, self.mlp.with_arrays(arrays[:n]))

    def forward(self, v: np.ndarray):
        v = np.asarray(v, dtype=np.float64)
        y, tape = mlp_forward(self.mlp, self._inputs(v))
        return y, tape

    def backward(self, tape, g_y) -> list[np.ndarray]:
        grads, g_in = mlp_backward(self.mlp, tape, g_y)
        if self.attribute.trainable:
            grads.append(g_in[:, self.dim:].sum(axis=0))
        return grads


def mlp_transfer(model: MlpTransferModel, v_x: np.ndarray) -> np.ndarray:
    v_x = np.asarray(v_x, dtype=np.float64)
    if v_x.shape != (model.dim,):
        raise ValueError(f"input dim {v_x.shape} != model dim {model.dim}")
    return model.transfer_rows(v_x[None, :])[0]
