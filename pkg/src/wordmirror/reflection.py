"""Reflection across learned mirrors: single-mirror (Ref) and per-word (Ref+PM) models.

A mirror is the hyperplane through point ``c`` with normal ``a``. Reflecting
``v`` gives ``v - 2 ((v - c) . a / (a . a)) a``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateMirrorError
from .nn import DenseLayer, MlpParams, init_params, mlp_backward, mlp_forward

MIRROR_EPS = 1e-8  # smallest acceptable |a| outside training
TRAIN_EPS = 1e-12  # added to a.a inside the training loss


@dataclass(frozen=True)
class Mirror:
    normal: np.ndarray
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "normal", np.asarray(self.normal, dtype=np.float64))
        object.__setattr__(self, "point", np.asarray(self.point, dtype=np.float64))
        if self.normal.shape != self.point.shape:
            raise ValueError("mirror normal and point differ in shape")
        if not (np.all(np.isfinite(self.normal)) and np.all(np.isfinite(self.point))):
            raise ValueError("mirror parameters must be finite")


def _check_normal(a: np.ndarray, word: str | None = None) -> None:
    norm = float(np.linalg.norm(a))
    if norm < MIRROR_EPS:
        raise DegenerateMirrorError(norm, word)


def reflect(mirror: Mirror, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    a, c = mirror.normal, mirror.point
    if v.shape != a.shape:
        raise ValueError(f"vector dim {v.shape} != mirror dim {a.shape}")
    _check_normal(a)
    return v - 2.0 * (np.dot(v - c, a) / np.dot(a, a)) * a


def distance_to_mirror(mirror: Mirror, v: np.ndarray) -> float:
    """Point-to-hyperplane distance ``|(v - c) . a| / |a|``."""
    a = mirror.normal
    _check_normal(a)
    return float(abs(np.dot(np.asarray(v, dtype=np.float64) - mirror.point, a)) / np.linalg.norm(a))


def reflect_rows(v: np.ndarray, a: np.ndarray, c: np.ndarray, eps: float = 0.0) -> np.ndarray:
    """Row-wise reflection of ``v`` (B, D) across mirrors ``(a, c)`` (B, D) or (D,)."""
    q = np.sum(a * a, axis=-1, keepdims=True) + eps
    s = np.sum((v - c) * a, axis=-1, keepdims=True) / q
    return v - 2.0 * s * a


def reflect_rows_backward(v, a, c, g_y, eps: float = 0.0):
    """Gradients of ``sum(g_y * reflect_rows(v, a, c, eps))`` w.r.t. ``(v, a, c)``."""
    r = v - c
    q = np.sum(a * a, axis=-1, keepdims=True) + eps
    p = np.sum(r * a, axis=-1, keepdims=True)
    s = p / q
    g_s = -2.0 * np.sum(g_y * a, axis=-1, keepdims=True)
    g_a = -2.0 * s * g_y + g_s * (r / q - 2.0 * p * a / (q * q))
    g_c = -g_s * a / q
    g_v = g_y + g_s * a / q
    return g_v, g_a, g_c


@dataclass(frozen=True)
class AttributeVector:
    id: str
    z: np.ndarray
    trainable: bool = True

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.float64)
        if z.ndim != 1 or not np.all(np.isfinite(z)):
            raise ValueError("attribute vector must be a finite 1-d array")
        object.__setattr__(self, "z", z)

    @classmethod
    def draw(cls, attr_id: str, dim: int, seed: int | np.random.Generator,
             trainable: bool = True) -> "AttributeVector":
        """Standard normal entries scaled by 1/sqrt(dim)."""
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return cls(attr_id, rng.standard_normal(dim) / np.sqrt(dim), trainable)


@dataclass(frozen=True)
class RefModel:
    """Reflection transfer whose mirror comes from two MLPs.

    With ``parameterized`` false both MLPs read ``z`` only, so every word shares
    one mirror. Otherwise they read ``[z ; v_x]`` and each word gets its own.
    """

    attribute: AttributeVector
    mlp_a: MlpParams
    mlp_c: MlpParams
    parameterized: bool = False

    def __post_init__(self):
        d = self.dim
        want_in = 2 * d if self.parameterized else d
        for name, mlp in (("mlp_a", self.mlp_a), ("mlp_c", self.mlp_c)):
            if mlp.in_dim != want_in or mlp.out_dim != d:
                raise ValueError(f"{name} maps {mlp.in_dim}->{mlp.out_dim}, "
                                 f"expected {want_in}->{d}")

    @property
    def kind(self) -> str:
        return "refpm" if self.parameterized else "ref"

    @property
    def dim(self) -> int:
        return self.attribute.z.shape[0]

    @classmethod
    def create(cls, attribute: AttributeVector, parameterized: bool, seed: int,
               hidden: Sequence[int] = (300,)) -> "RefModel":
        d = attribute.z.shape[0]
        rng = np.random.default_rng(seed)
        dims = [2 * d if parameterized else d, *hidden, d]
        return cls(attribute, init_params(rng, dims), init_params(rng, dims), parameterized)

    # -- inference -----------------------------------------------------------

    def _inputs(self, v: np.ndarray) -> np.ndarray:
        z = self.attribute.z
        if not self.parameterized:
            return z[None, :]
        return np.hstack([np.broadcast_to(z, (len(v), len(z))), v])

    def mirrors(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Normals and points for each row of ``v``; shape (B, D) each."""
        v = np.atleast_2d(np.asarray(v, dtype=np.float64))
        inp = self._inputs(v)
        a, _ = mlp_forward(self.mlp_a, inp)
        c, _ = mlp_forward(self.mlp_c, inp)
        if not self.parameterized:
            a = np.broadcast_to(a, v.shape)
            c = np.broadcast_to(c, v.shape)
        return a, c

    requires_knowledge = False

    def transfer_rows(self, v: np.ndarray, tokens=None) -> np.ndarray:
        """Reflect every row; degenerate mirrors give NaN rows instead of raising."""
        v = np.atleast_2d(np.asarray(v, dtype=np.float64))
        a, c = self.mirrors(v)
        bad = np.linalg.norm(a, axis=1) < MIRROR_EPS
        safe_a = np.where(bad[:, None], 1.0, a)
        y = reflect_rows(v, safe_a, c)
        y[bad] = np.nan
        return y

    # -- training hooks --------------------------------------------------------

    def parameters(self) -> list[np.ndarray]:
        out = self.mlp_a.arrays() + self.mlp_c.arrays()
        if self.attribute.trainable:
            out.append(self.attribute.z)
        return out

    def with_parameters(self, arrays: Sequence[np.ndarray]) -> "RefModel":
        na, nc = len(self.mlp_a.arrays()), len(self.mlp_c.arrays())
        attr = self.attribute
        if attr.trainable:
            attr = AttributeVector(attr.id, arrays[na + nc], True)
        return RefModel(attr, self.mlp_a.with_arrays(arrays[:na]),
                        self.mlp_c.with_arrays(arrays[na:na + nc]), self.parameterized)

    def forward(self, v: np.ndarray, eps: float = TRAIN_EPS):
        v = np.asarray(v, dtype=np.float64)
        inp = self._inputs(v)
        a1, tape_a = mlp_forward(self.mlp_a, inp)
        c1, tape_c = mlp_forward(self.mlp_c, inp)
        a = a1 if self.parameterized else np.broadcast_to(a1, v.shape)
        c = c1 if self.parameterized else np.broadcast_to(c1, v.shape)
        y = reflect_rows(v, a, c, eps)
        return y, (v, a, c, tape_a, tape_c, eps)

    def backward(self, cache, g_y: np.ndarray) -> list[np.ndarray]:
        v, a, c, tape_a, tape_c, eps = cache
        _, g_a, g_c = reflect_rows_backward(v, a, c, g_y, eps)
        if not self.parameterized:
            g_a = g_a.sum(axis=0, keepdims=True)
            g_c = g_c.sum(axis=0, keepdims=True)
        grads_a, in_a = mlp_backward(self.mlp_a, tape_a, g_a)
        grads_c, in_c = mlp_backward(self.mlp_c, tape_c, g_c)
        grads = grads_a + grads_c
        if self.attribute.trainable:
            d = self.dim
            grads.append((in_a[:, :d] + in_c[:, :d]).sum(axis=0))
        return grads


def mirror_for(model: RefModel, v_x: np.ndarray | None = None, word: str | None = None) -> Mirror:
    if model.parameterized:
        if v_x is None:
            raise ValueError("a parameterized mirror needs the input word vector")
        a, c = model.mirrors(np.asarray(v_x, dtype=np.float64)[None, :])
    else:
        a, c = model.mirrors(np.zeros((1, model.dim)))
    _check_normal(a[0], word)
    return Mirror(np.array(a[0]), np.array(c[0]))


def transfer(model: RefModel, v_x: np.ndarray, word: str | None = None) -> np.ndarray:
    return reflect(mirror_for(model, v_x, word), v_x)


def constant_mirror_model(attribute: AttributeVector, normal, point,
                          parameterized: bool = False) -> RefModel:
    """Ref model whose MLPs ignore their input and emit a fixed ``(normal, point)``.

    Zero weights and the planted vectors as output biases; useful as an oracle.
    """
    d = attribute.z.shape[0]
    in_dim = 2 * d if parameterized else d

    def const(vec):
        return MlpParams([DenseLayer(np.zeros((d, in_dim)), np.asarray(vec, dtype=np.float64),
                                     "identity")])

    return RefModel(attribute, const(normal), const(point), parameterized)
