"""Accuracy/stability scoring, distance and mirror-parameter exports, sentence transfer."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from .data import AttributeDataset, NonAttributeSet, resolve_triplets
from .embeddings import EmbeddingTable, nearest_indices, nearest_token
from .errors import ZeroNormError
from .reflection import MIRROR_EPS, RefModel

logger = logging.getLogger(__name__)


def delta(table: EmbeddingTable, v_y: np.ndarray, target: str) -> int:
    """1 if ``target`` is the nearest token to ``v_y``; a zero or NaN ``v_y`` scores 0."""
    table.index(target)
    v_y = np.asarray(v_y, dtype=np.float64)
    if not np.all(np.isfinite(v_y)):
        logger.warning("non-finite transferred vector for target %r; counted as a miss", target)
        return 0
    try:
        tok, _ = nearest_token(table, v_y)
    except ZeroNormError:
        logger.warning("zero-norm transferred vector for target %r; counted as a miss", target)
        return 0
    return int(tok == target)


def predict(table: EmbeddingTable, y: np.ndarray) -> tuple[list[str | None], np.ndarray]:
    """Nearest tokens for each row of ``y``; rows that are zero or non-finite get None."""
    y = np.atleast_2d(y)
    ok = np.all(np.isfinite(y), axis=1) & (np.linalg.norm(np.nan_to_num(y), axis=1) > 0)
    if not np.all(ok):
        logger.warning("%d transferred vectors are zero or non-finite; counted as misses",
                       int((~ok).sum()))
    tokens: list[str | None] = [None] * len(y)
    sims = np.full(len(y), np.nan)
    if np.any(ok):
        idx, s = nearest_indices(table, y[ok])
        for slot, i, si in zip(np.flatnonzero(ok), idx, s):
            tokens[slot] = table.tokens[i]
            sims[slot] = si
    return tokens, sims


def transfer_tokens(model, table: EmbeddingTable, tokens: Sequence[str]) -> np.ndarray:
    v = table.vectors[[table.index(t) for t in tokens]]
    return model.transfer_rows(v, list(tokens))


def accuracy(model, triplets, table: EmbeddingTable) -> float | None:
    """Fraction of ``(x, t, z)`` triplets whose transfer lands nearest ``t``."""
    if not triplets:
        return None
    preds, _ = predict(table, transfer_tokens(model, table, [x for x, _, _ in triplets]))
    return float(np.mean([p == t for p, (_, t, _) in zip(preds, triplets)]))


@dataclass
class EvalReport:
    attribute: str
    model_kind: str
    vocab_size: int
    accuracy: float | None
    stability: float | None
    items: list[dict] = field(default_factory=list)
    config_snapshot: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


def evaluate(model, test_triplets, nonattr_test: Sequence[str], table: EmbeddingTable,
             attribute: str = "", config_snapshot: dict | None = None,
             seeds: dict | None = None, strict: bool = False) -> EvalReport:
    """Accuracy over directed test triplets and stability over non-attribute words.

    An empty set gives ``None`` for its metric. Knowledge-based baselines get
    no stability score: non-attribute words have no side to act on.
    """
    triplets, skipped_a = resolve_triplets(list(test_triplets), table, strict)
    words = [w for w in nonattr_test if w in table]
    skipped_n = len(nonattr_test) - len(words)
    if skipped_n:
        logger.warning("skipped %d out-of-vocabulary non-attribute words", skipped_n)

    items: list[dict] = []
    acc = stab = None
    if triplets:
        y = transfer_tokens(model, table, [x for x, _, _ in triplets])
        preds, sims = predict(table, y)
        hits = [p == t for p, (_, t, _) in zip(preds, triplets)]
        acc = float(np.mean(hits))
        items += [_item("A", x, t, p, s, h) for (x, t, _), p, s, h in zip(triplets, preds, sims, hits)]

    notes = []
    if getattr(model, "requires_knowledge", False):
        notes.append("knowledge-based transfer: stability not applicable")
    elif words:
        preds, sims = predict(table, transfer_tokens(model, table, words))
        hits = [p == w for p, w in zip(preds, words)]
        stab = float(np.mean(hits))
        items += [_item("N", w, w, p, s, h) for w, p, s, h in zip(words, preds, sims, hits)]

    return EvalReport(
        attribute=attribute, model_kind=getattr(model, "kind", type(model).__name__),
        vocab_size=len(table), accuracy=acc, stability=stab, items=items,
        config_snapshot=config_snapshot or {}, seeds=seeds or {},
        counts={"test_triplets": len(triplets), "nonattr_test": 0 if stab is None else len(words),
                "skipped_triplets": skipped_a, "skipped_nonattr": skipped_n},
        notes=notes)


def _item(kind, x, expected, predicted, sim, correct) -> dict:
    return {"set": kind, "input": x, "expected": expected, "predicted": predicted,
            "similarity": None if not np.isfinite(sim) else float(sim), "correct": bool(correct)}


# -- exports -------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def mirror_distances(model: RefModel, v: np.ndarray) -> np.ndarray:
    a, c = model.mirrors(v)
    norm = np.linalg.norm(a, axis=1)
    dist = np.abs(np.sum((v - c) * a, axis=1)) / np.where(norm < MIRROR_EPS, np.nan, norm)
    return dist


def export_distances(model: RefModel, dataset: AttributeDataset, nonattr: NonAttributeSet,
                     table: EmbeddingTable, split: str = "test") -> str:
    """TSV of word-to-mirror distances and, for attribute words, distance to the target.

    One row per directed triplet of ``split`` plus one per non-attribute test word.
    """
    triplets, _ = resolve_triplets(dataset.triplets(split), table)
    words = [w for w in nonattr.test if w in table]
    rows = ["label\tinput\ttarget\tmirror_distance\ttarget_distance"]
    if triplets:
        vx = table.vectors[[table.index(x) for x, _, _ in triplets]]
        vt = table.vectors[[table.index(t) for _, t, _ in triplets]]
        dm = mirror_distances(model, vx)
        dt = np.linalg.norm(vx - vt, axis=1)
        for (x, t, _), a, b in zip(triplets, dm, dt):
            rows.append(f"attribute\t{x}\t{t}\t{_fmt(a)}\t{_fmt(b)}")
    if words:
        vn = table.vectors[[table.index(w) for w in words]]
        for w, a in zip(words, mirror_distances(model, vn)):
            rows.append(f"non-attribute\t{w}\t\t{_fmt(a)}\t")
    return "\n".join(rows) + "\n"


def export_mirror_params(model: RefModel, words: Sequence[str], table: EmbeddingTable,
                         pair_ids: Sequence[int | str] | None = None) -> str:
    """TSV with one row per word: token, pair id, then every component of ``a``."""
    if not model.parameterized:
        logger.warning("single-mirror model: every row carries the same normal")
    words = list(words)
    if pair_ids is None:
        pair_ids = [""] * len(words)
    v = table.vectors[[table.index(w) for w in words]]
    a, _ = model.mirrors(v)
    head = ["token", "pair_id"] + [f"a{i}" for i in range(model.dim)]
    rows = ["\t".join(head)]
    for w, pid, vec in zip(words, pair_ids, a):
        rows.append("\t".join([w, str(pid)] + [_fmt(x) for x in vec]))
    return "\n".join(rows) + "\n"


def pair_word_list(dataset: AttributeDataset, split: str = "test") -> tuple[list[str], list[int]]:
    words, ids = [], []
    for i, (m, w) in enumerate(dataset.pairs(split)):
        words += [m, w]
        ids += [i, i]
    return words, ids


# -- sentences -----------------------------------------------------------------

@dataclass
class TokenTransfer:
    input: str
    output: str
    oov: bool
    similarity: float | None = None
    mirror_distance: float | None = None


def transfer_words(model, table: EmbeddingTable, words: Sequence[str]) -> list[TokenTransfer]:
    """Transfer each word independently; OOV words pass through unchanged.

    Lookup tries the word as written, then lower-cased.
    """
    out = []
    for word in words:
        key = word if word in table else word.lower() if word.lower() in table else None
        if key is None:
            out.append(TokenTransfer(word, word, True))
            continue
        v = table.vectors[table.index(key)][None, :]
        y = model.transfer_rows(v, [key])
        preds, sims = predict(table, y)
        if preds[0] is None:
            out.append(TokenTransfer(word, word, False))
            continue
        dist = None
        if isinstance(model, RefModel):
            d = mirror_distances(model, v)[0]
            dist = None if not np.isfinite(d) else float(d)
        out.append(TokenTransfer(word, preds[0], False, float(sims[0]), dist))
    return out


def transfer_text(model, table: EmbeddingTable, text: str | Sequence[str],
                  verbose: bool = False) -> list[str]:
    tokens = text.split() if isinstance(text, str) else list(text)
    result = []
    for tt in transfer_words(model, table, tokens):
        result.append(tt.output + ("<OOV>" if verbose and tt.oov else ""))
    return result
