"""Transfer loss and the Adam training loop for Ref, Ref+PM and the MLP baseline."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .baselines import MlpTransferModel
from .data import AttributeDataset, NonAttributeSet, resolve_triplets
from .embeddings import EmbeddingTable
from .errors import NonFiniteError
from .evaluation import accuracy
from .nn import adam_init, adam_step
from .reflection import AttributeVector, RefModel

logger = logging.getLogger(__name__)

TRAINABLE_KINDS = ("ref", "refpm", "mlp")


@dataclass
class TrainConfig:
    model_kind: str = "refpm"
    alpha: float = 1e-4
    max_epochs: int = 2000
    batch_size: int = 32
    seed: int = 0
    patience: int = 50
    n_train_size: int = 10
    loss_weights: tuple[float, float] = (1.0, 1.0)
    mirror_hidden: tuple[int, ...] = (300,)
    mlp_hidden: tuple[int, ...] = (300, 300)
    z_trainable: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    val_vocab_limit: int | None = None
    strict: bool = False

    def __post_init__(self):
        if self.model_kind not in TRAINABLE_KINDS:
            raise ValueError(f"model kind must be one of {TRAINABLE_KINDS}, got {self.model_kind!r}")
        if self.batch_size < 1 or self.max_epochs < 0 or self.patience < 1 or self.n_train_size < 0:
            raise ValueError("batch size and patience must be positive, epochs and |N_train| >= 0")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        self.loss_weights = tuple(float(w) for w in self.loss_weights)
        self.mirror_hidden = tuple(int(h) for h in self.mirror_hidden)
        self.mlp_hidden = tuple(int(h) for h in self.mlp_hidden)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["loss_weights"] = list(self.loss_weights)
        d["mirror_hidden"] = list(self.mirror_hidden)
        d["mlp_hidden"] = list(self.mlp_hidden)
        return d


def seed_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators for z, weights and batch order, all from one seed."""
    z, init, order = np.random.SeedSequence(seed).spawn(3)
    return {"z": np.random.default_rng(z), "init": np.random.default_rng(init),
            "order": np.random.default_rng(order)}


def build_model(config: TrainConfig, attribute: str, dim: int):
    rngs = seed_streams(config.seed)
    attr = AttributeVector.draw(attribute, dim, rngs["z"], trainable=config.z_trainable)
    init_seed = int(rngs["init"].integers(2**63))
    if config.model_kind == "mlp":
        return MlpTransferModel.create(attr, init_seed, config.mlp_hidden)
    return RefModel.create(attr, config.model_kind == "refpm", init_seed, config.mirror_hidden)


def loss_arrays(model, src: np.ndarray, tgt: np.ndarray, nonattr: np.ndarray,
                weights: tuple[float, float] = (1.0, 1.0)) -> tuple[float, list[np.ndarray]]:
    """Mean squared transfer error on pairs plus mean squared drift on non-attribute words.

    Returns the loss and its gradient w.r.t. ``model.parameters()``. An empty
    set contributes nothing to either term.
    """
    d = model.dim
    src = np.asarray(src, dtype=np.float64).reshape(-1, d)
    tgt = np.asarray(tgt, dtype=np.float64).reshape(-1, d)
    nonattr = np.asarray(nonattr, dtype=np.float64).reshape(-1, d)
    n_a, n_n = len(src), len(nonattr)
    x = np.vstack([src, nonattr])
    if len(x) == 0:
        return 0.0, [np.zeros_like(p) for p in model.parameters()]
    y, cache = model.forward(x)
    r = y - np.vstack([tgt, nonattr])
    scale = np.empty((len(x), 1))
    if n_a:
        scale[:n_a] = weights[0] / n_a
    if n_n:
        scale[n_a:] = weights[1] / n_n
    loss = float(np.sum(scale * r * r))
    grads = model.backward(cache, 2.0 * scale * r)
    return loss, grads


def loss(model, triplets, words_n, table: EmbeddingTable,
         weights: tuple[float, float] = (1.0, 1.0), strict: bool = False):
    """Token-level wrapper of :func:`loss_arrays`."""
    triplets, _ = resolve_triplets(list(triplets), table, strict)
    words = [w for w in words_n if w in table]
    if strict and len(words) != len(words_n):
        raise KeyError("unresolvable non-attribute word")
    src = table.vectors[[table.index(x) for x, _, _ in triplets]]
    tgt = table.vectors[[table.index(t) for _, t, _ in triplets]]
    non = table.vectors[[table.index(w) for w in words]]
    return loss_arrays(model, src, tgt, non, weights)


@dataclass
class TrainResult:
    model: object
    history: list[dict] = field(default_factory=list)
    best_epoch: int | None = None
    best_val_accuracy: float | None = None
    best_step: int = 0
    stopped_early: bool = False


class TrainingDiverged(NonFiniteError):
    def __init__(self, message: str, result: TrainResult):
        super().__init__(message)
        self.result = result


def train(dataset: AttributeDataset, nonattr: NonAttributeSet, table: EmbeddingTable,
          config: TrainConfig, model=None) -> TrainResult:
    """Minibatch Adam on the transfer loss, keeping the best-validation-accuracy weights.

    Each step sees a shuffled batch of directed training triplets plus every
    non-attribute training word (or a random ``batch_size`` of them when there
    are more). Ties in validation accuracy keep the earlier epoch. Training
    stops after ``patience`` epochs without improvement.
    """
    if model is None:
        model = build_model(config, dataset.attribute, table.dim)
    train_trip, _ = resolve_triplets(dataset.triplets("train"), table, config.strict)
    val_trip, _ = resolve_triplets(dataset.triplets("val"), table, config.strict)
    src = table.vectors[[table.index(x) for x, _, _ in train_trip]]
    tgt = table.vectors[[table.index(t) for _, t, _ in train_trip]]
    n_words = [w for w in nonattr.train if w in table]
    non = table.vectors[[table.index(w) for w in n_words]].reshape(-1, table.dim)
    val_table = table
    if config.val_vocab_limit is not None and config.val_vocab_limit < len(table):
        val_table = table.subset(table.tokens[:config.val_vocab_limit])
        val_trip = [t for t in val_trip if t[0] in val_table and t[1] in val_table]

    order_rng = seed_streams(config.seed)["order"]
    params = model.parameters()
    state = adam_init(params, config.alpha, config.beta1, config.beta2, config.adam_eps)
    result = TrainResult(model)
    best_acc = -1.0
    since_best = 0

    for epoch in range(1, config.max_epochs + 1):
        perm = order_rng.permutation(len(src))
        batch_losses = []
        for start in range(0, max(len(src), 1), config.batch_size):
            idx = perm[start:start + config.batch_size]
            if len(non) > config.batch_size:
                n_batch = non[np.sort(order_rng.choice(len(non), config.batch_size, replace=False))]
            else:
                n_batch = non
            value, grads = loss_arrays(model, src[idx], tgt[idx], n_batch, config.loss_weights)
            if not np.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}", result)
            params, state = adam_step(state, params, grads)
            model = model.with_parameters(params)
            batch_losses.append(value)

        val_acc = accuracy(model, val_trip, val_table) if val_trip else None
        result.history.append({"epoch": epoch, "loss": float(np.mean(batch_losses)),
                               "val_accuracy": val_acc})
        if val_acc is None:
            result.model, result.best_epoch, result.best_step = model, epoch, state.t
            continue
        if val_acc > best_acc:
            best_acc, since_best = val_acc, 0
            result.model, result.best_epoch, result.best_val_accuracy = model, epoch, val_acc
            result.best_step = state.t
        else:
            since_best += 1
            if since_best >= config.patience:
                result.stopped_early = True
                logger.info("early stop at epoch %d (best %d, val acc %.3f)",
                            epoch, result.best_epoch, best_acc)
                break
    return result
