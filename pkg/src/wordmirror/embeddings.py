"""Pre-trained word embedding tables: text I/O, lookup and cosine retrieval.

The on-disk format is the word2vec/GloVe text layout: an optional
``|V| D`` header line followed by one ``token f1 ... fD`` line per word.
"""

from __future__ import annotations

import itertools
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmbeddingFormatError, UnknownTokenError, ZeroNormError

logger = logging.getLogger(__name__)

# Row chunk for batched nearest-neighbour queries; bounds the |V| x chunk matrix.
_QUERY_CHUNK = 256


@dataclass(frozen=True)
class EmbeddingTable:
    """Immutable vocabulary plus one float64 vector per token."""

    tokens: tuple[str, ...]
    vectors: np.ndarray
    _index: dict[str, int] = field(init=False, repr=False, compare=False)
    _norms: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=np.float64, copy=True)
        if vectors.ndim != 2:
            raise ValueError("vectors must be a |V| x D matrix")
        if len(self.tokens) != vectors.shape[0]:
            raise ValueError(
                f"{len(self.tokens)} tokens but {vectors.shape[0]} vectors")
        if vectors.shape[0] < 1 or vectors.shape[1] < 1:
            raise ValueError("table needs at least one token and one dimension")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("embedding vectors must be finite")
        index: dict[str, int] = {}
        for i, tok in enumerate(self.tokens):
            if tok in index:
                raise ValueError(f"duplicate token {tok!r}")
            index[tok] = i
        vectors.setflags(write=False)
        norms = np.linalg.norm(vectors, axis=1)
        norms.setflags(write=False)
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_norms", norms)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: object) -> bool:
        return token in self._index

    def index(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise UnknownTokenError(token) from None

    def subset(self, tokens: Iterable[str]) -> "EmbeddingTable":
        toks = list(tokens)
        return EmbeddingTable(tuple(toks), self.vectors[[self.index(t) for t in toks]])


def load_embeddings(path: str | os.PathLike, limit: int | None = None) -> EmbeddingTable:
    """Parse a text embedding file, keeping only the first ``limit`` rows if given."""
    if limit is not None and limit < 1:
        raise ValueError("limit must be a positive integer")
    path = Path(path)
    tokens: list[str] = []
    rows: list[list[float]] = []
    seen: dict[str, int] = {}
    header: tuple[int, int] | None = None
    dim: int | None = None

    with path.open("r", encoding="utf-8") as fh:
        lines = ((n, raw) for n, raw in enumerate(fh, start=1) if raw.strip())
        buffered = list(itertools.islice(lines, 2))
        if buffered and buffered[0][0] == 1:
            fields = buffered[0][1].split()
            # "3 2" is a header unless the next line says it is a 1-d row.
            if len(fields) == 2 and all(_is_int(f) for f in fields) and (
                    len(buffered) == 1 or len(buffered[1][1].split()) != 2):
                header = (int(fields[0]), int(fields[1]))
                dim = header[1]
                if dim < 1:
                    raise EmbeddingFormatError("header dimension must be >= 1", 1)
                buffered = buffered[1:]

        for lineno, raw in itertools.chain(buffered, lines):
            if limit is not None and len(tokens) >= limit:
                break
            token, *values = raw.split()
            if dim is None:
                dim = len(values)
                if dim < 1:
                    raise EmbeddingFormatError("row has no vector components", lineno)
            if len(values) != dim:
                raise EmbeddingFormatError(
                    f"dimension mismatch: expected {dim} values, got {len(values)}", lineno)
            try:
                vec = [float(v) for v in values]
            except ValueError:
                raise EmbeddingFormatError("non-numeric field", lineno) from None
            if not all(np.isfinite(vec)):
                raise EmbeddingFormatError("non-finite value", lineno)
            if token in seen:
                raise EmbeddingFormatError(
                    f"duplicate token {token!r} (first seen on line {seen[token]})", lineno)
            seen[token] = lineno
            tokens.append(token)
            rows.append(vec)

    if not tokens:
        raise EmbeddingFormatError(f"no embedding rows in {path}")
    if header is not None and limit is None and header[0] != len(tokens):
        raise EmbeddingFormatError(
            f"header declares {header[0]} rows but file has {len(tokens)}", 1)
    return EmbeddingTable(tuple(tokens), np.asarray(rows, dtype=np.float64))


def _is_int(s: str) -> bool:
    try:
        int(s)
    except ValueError:
        return False
    return True


def save_subset(table: EmbeddingTable, path: str | os.PathLike,
                tokens: Sequence[str] | None = None, header: bool = True) -> None:
    """Write ``table`` (or the listed tokens) in text format, 17 significant digits."""
    sub = table if tokens is None else table.subset(tokens)
    lines = []
    if header:
        lines.append(f"{len(sub)} {sub.dim}\n")
    for tok, vec in zip(sub.tokens, sub.vectors):
        lines.append(tok + " " + " ".join(format(x, ".17g") for x in vec) + "\n")
    atomic_write_text(path, "".join(lines))


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def lookup(table: EmbeddingTable, token: str) -> np.ndarray:
    return table.vectors[table.index(token)]


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ZeroNormError("cosine similarity undefined for a zero-norm vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def nearest_token(table: EmbeddingTable, v: np.ndarray) -> tuple[str, float]:
    """Most cosine-similar token over the whole vocabulary, query word included.

    Ties go to the lowest row index; zero-norm rows are never candidates.
    """
    idx, sims = nearest_indices(table, np.asarray(v, dtype=np.float64)[None, :])
    return table.tokens[idx[0]], float(sims[0])


def nearest_indices(table: EmbeddingTable, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched :func:`nearest_token`: row indices and similarities for each query row."""
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if queries.shape[1] != table.dim:
        raise ValueError(f"query dim {queries.shape[1]} != table dim {table.dim}")
    qnorm = np.linalg.norm(queries, axis=1)
    if np.any(qnorm == 0.0):
        raise ZeroNormError("nearest-token query has zero norm")
    valid = table._norms > 0.0
    if not np.any(valid):
        raise ZeroNormError("every candidate row has zero norm")
    safe_norms = np.where(valid, table._norms, 1.0)
    out_idx = np.empty(len(queries), dtype=np.int64)
    out_sim = np.empty(len(queries), dtype=np.float64)
    for start in range(0, len(queries), _QUERY_CHUNK):
        q = queries[start:start + _QUERY_CHUNK]
        sims = (table.vectors @ q.T) / (safe_norms[:, None] * qnorm[None, start:start + len(q)])
        sims[~valid] = -np.inf
        best = np.argmax(sims, axis=0)  # first maximum -> lowest index
        out_idx[start:start + len(q)] = best
        out_sim[start:start + len(q)] = np.clip(sims[best, np.arange(len(q))], -1.0, 1.0)
    return out_idx, out_sim
