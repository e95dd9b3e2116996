"""JSON checkpoints for every model kind, written atomically.

Floats are written with Python's shortest round-trip repr, so a save/load
cycle reproduces every parameter bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Any

import numpy as np

from .baselines import AnalogyModel, DifferenceVector, KnowledgeTable, MlpTransferModel
from .embeddings import atomic_write_text
from .errors import WordMirrorError
from .nn import DenseLayer, MlpParams
from .reflection import AttributeVector, RefModel

FORMAT = "wordmirror-checkpoint"
VERSION = 1


class CheckpointError(WordMirrorError, ValueError):
    pass


def _mlp_to_dict(mlp: MlpParams) -> dict:
    return {
        "dims": mlp.dims,
        "activations": [layer.activation for layer in mlp.layers],
        "layers": [{"weights": layer.weights.tolist(), "bias": layer.bias.tolist()}
                   for layer in mlp.layers],
    }


def _mlp_from_dict(d: dict) -> MlpParams:
    layers = [DenseLayer(np.array(layer["weights"], dtype=np.float64).reshape(out, inp),
                         np.array(layer["bias"], dtype=np.float64), act)
              for layer, act, inp, out in zip(d["layers"], d["activations"], d["dims"], d["dims"][1:])]
    return MlpParams(layers)


def _attr_to_dict(attr: AttributeVector) -> dict:
    return {"id": attr.id, "z": attr.z.tolist(), "trainable": attr.trainable}


def _attr_from_dict(d: dict) -> AttributeVector:
    return AttributeVector(d["id"], np.array(d["z"], dtype=np.float64), bool(d["trainable"]))


def pairs_hash(pairs) -> str:
    h = hashlib.sha256()
    for m, w in pairs:
        h.update(f"{m}\t{w}\n".encode("utf-8"))
    return h.hexdigest()


def model_to_dict(model, **meta: Any) -> dict:
    doc: dict[str, Any] = {"format": FORMAT, "version": VERSION, "model_kind": model.kind}
    if isinstance(model, RefModel):
        doc.update(embedding_dim=model.dim, parameterized=model.parameterized,
                   attribute=_attr_to_dict(model.attribute),
                   mlp_a=_mlp_to_dict(model.mlp_a), mlp_c=_mlp_to_dict(model.mlp_c))
    elif isinstance(model, MlpTransferModel):
        doc.update(embedding_dim=model.dim, attribute=_attr_to_dict(model.attribute),
                   mlp=_mlp_to_dict(model.mlp))
    elif isinstance(model, AnalogyModel):
        doc.update(embedding_dim=int(model.diff.d.shape[0]), mode=model.mode,
                   d=model.diff.d.tolist(),
                   source_pair=list(model.diff.source_pair) if model.diff.source_pair else None,
                   knowledge=dict(sorted(model.knowledge.items())) if model.knowledge else None)
    else:
        raise CheckpointError(f"cannot serialise {type(model).__name__}")
    doc.update(meta)
    return doc


def model_from_dict(doc: dict):
    if doc.get("format") != FORMAT:
        raise CheckpointError("not a wordmirror checkpoint")
    if doc.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('version')}")
    kind = doc["model_kind"]
    if kind in ("ref", "refpm"):
        return RefModel(_attr_from_dict(doc["attribute"]), _mlp_from_dict(doc["mlp_a"]),
                        _mlp_from_dict(doc["mlp_c"]), bool(doc["parameterized"]))
    if kind == "mlp":
        return MlpTransferModel(_attr_from_dict(doc["attribute"]), _mlp_from_dict(doc["mlp"]))
    if kind in ("diff", "diff+", "diff-", "meandiff", "meandiff+", "meandiff-"):
        src = tuple(doc["source_pair"]) if doc.get("source_pair") else None
        knowledge = KnowledgeTable(doc["knowledge"]) if doc.get("knowledge") is not None else None
        return AnalogyModel(kind, DifferenceVector(np.array(doc["d"], dtype=np.float64), src),
                            doc["mode"], knowledge)
    raise CheckpointError(f"unknown model kind {kind!r}")


def save_checkpoint(model, path: str | os.PathLike, **meta: Any) -> None:
    doc = model_to_dict(model, **meta)
    atomic_write_text(path, json.dumps(doc, sort_keys=True, allow_nan=False) + "\n")


def load_checkpoint(path: str | os.PathLike) -> tuple[Any, dict]:
    """Returns ``(model, document)``; the document keeps the stored metadata."""
    with Path(path).open("r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{path}: {exc}") from None
    return model_from_dict(doc), doc
