"""Dense ReLU networks with hand-written backprop, Adam, and a gradient checker.

Everything is float64 numpy. Inputs may be a single vector ``(in,)`` or a
batch of row vectors ``(B, in)``; parameter gradients of a batch are summed
over its rows.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import NonFiniteError

ACTIVATIONS = ("relu", "identity")


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "relu"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError(
                f"bad layer shapes W{self.weights.shape} b{self.bias.shape}")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class MlpParams:
    layers: list[DenseLayer]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("an MLP needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError(f"layer dims do not chain: {prev.out_dim} -> {nxt.in_dim}")
        if self.layers[-1].activation != "identity":
            raise ValueError("final layer must be linear")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def dims(self) -> list[int]:
        return [self.in_dim] + [layer.out_dim for layer in self.layers]

    def arrays(self) -> list[np.ndarray]:
        """Flat ``[W1, b1, W2, b2, ...]`` view used by the optimizer."""
        out = []
        for layer in self.layers:
            out += [layer.weights, layer.bias]
        return out

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "MlpParams":
        if len(arrays) != 2 * len(self.layers):
            raise ValueError("array count does not match layer count")
        return MlpParams([
            DenseLayer(arrays[2 * i], arrays[2 * i + 1], layer.activation)
            for i, layer in enumerate(self.layers)
        ])


def init_params(seed: int | np.random.Generator, dims: Sequence[int]) -> MlpParams:
    """Glorot-uniform weights, zero biases, ReLU hidden layers, linear output."""
    if len(dims) < 2:
        raise ValueError("dims needs at least input and output sizes")
    if any(d < 1 for d in dims):
        raise ValueError("layer sizes must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    layers = []
    for k, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        act = "identity" if k == len(dims) - 2 else "relu"
        layers.append(DenseLayer(w, np.zeros(fan_out), act))
    return MlpParams(layers)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


@dataclass
class Tape:
    inputs: list[np.ndarray]  # input to each layer
    preacts: list[np.ndarray]  # W x + b for each layer
    batched: bool


def mlp_forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, Tape]:
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    h = x if batched else x[None, :]
    if h.shape[1] != params.in_dim:
        raise ValueError(f"input dim {h.shape[1]} != MLP input dim {params.in_dim}")
    inputs, preacts = [], []
    for layer in params.layers:
        inputs.append(h)
        pre = h @ layer.weights.T + layer.bias
        preacts.append(pre)
        h = relu(pre) if layer.activation == "relu" else pre
    return (h if batched else h[0]), Tape(inputs, preacts, batched)


def mlp_backward(params: MlpParams, tape: Tape,
                 upstream: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Gradients of ``sum(upstream * output)``.

    Returns ``(param_grads, input_grad)`` where ``param_grads`` is aligned
    with :meth:`MlpParams.arrays`.
    """
    g = np.asarray(upstream, dtype=np.float64)
    if not tape.batched:
        g = g[None, :]
    if g.shape != tape.preacts[-1].shape:
        raise ValueError(f"upstream shape {g.shape} != output shape {tape.preacts[-1].shape}")
    grads: list[np.ndarray] = [None] * (2 * len(params.layers))  # type: ignore[list-item]
    for k in reversed(range(len(params.layers))):
        layer = params.layers[k]
        if layer.activation == "relu":
            g = g * (tape.preacts[k] > 0.0)  # relu'(0) = 0
        grads[2 * k] = g.T @ tape.inputs[k]
        grads[2 * k + 1] = g.sum(axis=0)
        g = g @ layer.weights
    return grads, (g if tape.batched else g[0])


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    alpha: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("Adam betas must lie in [0, 1)")


def adam_init(params: Sequence[np.ndarray], alpha: float = 1e-4, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params],
                     0, alpha, beta1, beta2, eps)


def adam_step(state: AdamState, params: Sequence[np.ndarray] | MlpParams,
              grads: Sequence[np.ndarray]):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``.

    ``params`` may be an :class:`MlpParams` (returned as one) or a flat list of
    arrays. Non-finite gradients raise :class:`NonFiniteError` and nothing moves.
    """
    mlp = params if isinstance(params, MlpParams) else None
    arrays = params.arrays() if mlp is not None else list(params)
    if len(arrays) != len(grads) or len(arrays) != len(state.m):
        raise ValueError("params, grads and optimizer state differ in length")
    for p, g, m in zip(arrays, grads, state.m):
        if p.shape != np.shape(g) or p.shape != m.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {np.shape(g)}, state {m.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non-finite gradient; Adam step rejected")

    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(arrays, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new_p.append(p - state.alpha * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    new_state = replace(state, m=new_m, v=new_v, t=t)
    if mlp is not None:
        return mlp.with_arrays(new_p), new_state
    return new_p, new_state


def grad_check(loss_and_grad: Callable[[list[np.ndarray]], tuple[float, list[np.ndarray]]],
               params: Sequence[np.ndarray], h: float = 1e-5, max_coords: int = 10_000,
               seed: int = 0, floor: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_and_grad(params) -> (loss, grads)`` must be pure. The error for a
    coordinate is ``|analytic - numeric| / max(|numeric|, floor)``. Above
    ``max_coords`` coordinates a seeded random subsample is checked.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    params = [np.array(p, dtype=np.float64) for p in params]
    _, analytic = loss_and_grad(params)
    coords = [(i, j) for i, p in enumerate(params) for j in range(p.size)]
    if len(coords) > max_coords:
        rng = np.random.default_rng(seed)
        pick = np.sort(rng.choice(len(coords), size=max_coords, replace=False))
        coords = [coords[k] for k in pick]

    worst = 0.0
    for i, j in coords:
        flat = params[i].reshape(-1)
        orig = flat[j]
        flat[j] = orig + h
        lp, _ = loss_and_grad(params)
        flat[j] = orig - h
        lm, _ = loss_and_grad(params)
        flat[j] = orig
        numeric = (lp - lm) / (2.0 * h)
        a = np.asarray(analytic[i]).reshape(-1)[j]
        worst = max(worst, abs(a - numeric) / max(abs(numeric), floor))
    return float(worst)
