"""From-scratch MLP encoder and the contrastive training loop.

The encoder is a plain affine/activation stack with manual reverse-mode
gradients; the loop wires augmented views through the encoder, row
normalization, cosine similarity and one of the three loss kernels, and
updates weights with SGD-momentum under a cosine-annealed learning rate.
Everything is driven by explicit seeds: a run is bit-reproducible on a
fixed platform.

Default hyperparameters are tuned for the bundled synthetic benchmark:
batch 256 and 50 epochs keep the temperature sensitivity of the fixed-
temperature loss measurable (large batches sharpen it, long schedules
wash it out) while a full sweep stays under a minute on one CPU core.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import AugmentationConfig, Dataset, make_views
from .errors import DivergedLoss, InvalidParams, ShapeMismatch, StaleCache
from .losses import LEARNABLE_T, TemperatureParam, backprop_to_embeddings, evaluate_loss
from .numerics import cosine_similarity_matrix, l2_normalize

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class EncoderConfig:
    layer_widths: tuple[int, ...] = (32, 64, 32)
    activation: str = "relu"
    init_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        if len(self.layer_widths) < 2:
            raise InvalidParams("need at least input and output widths")
        if any(w < 1 for w in self.layer_widths):
            raise InvalidParams(f"widths must be >= 1, got {self.layer_widths}")
        if self.activation not in ACTIVATIONS:
            raise InvalidParams(f"activation must be one of {ACTIVATIONS}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 256
    lr0: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 1e-4
    loss: TemperatureParam = field(default_factory=TemperatureParam.temperature_free)
    aug: AugmentationConfig = field(default_factory=AugmentationConfig)
    seed: int = 0
    symmetric: bool = False
    reduction: str = "mean"

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidParams(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 2:
            raise InvalidParams(f"batch_size must be >= 2, got {self.batch_size}")
        if self.lr0 <= 0:
            raise InvalidParams(f"lr0 must be > 0, got {self.lr0}")
        if not 0 <= self.momentum < 1:
            raise InvalidParams(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise InvalidParams(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.reduction not in ("mean", "sum"):
            raise InvalidParams(f"reduction must be 'mean' or 'sum', got {self.reduction}")


@dataclass
class RunReport:
    loss_trajectory: list[float]
    wall_time: float
    config_echo: dict
    learnable_t_trajectory: list[float] | None = None
    final_knn_acc: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "loss_trajectory": self.loss_trajectory,
            "final_knn_acc": self.final_knn_acc,
            "wall_time": self.wall_time,
            "config_echo": self.config_echo,
            "learnable_t_trajectory": self.learnable_t_trajectory,
        }


@dataclass
class ForwardCache:
    """Everything the backward pass needs, tied to one forward call."""

    weights: list
    inputs: list            # input of each affine layer
    pre_activations: list   # affine outputs, before the nonlinearity
    activation: str
    _ids: tuple = ()

    def __post_init__(self):
        self._ids = tuple(id(w) for w in self.weights)


def init_weights(cfg: EncoderConfig) -> list[np.ndarray]:
    """Per-layer uniform init in +-sqrt(6 / (fan_in + fan_out)); zero biases.

    Returned as a flat list [W1, b1, W2, b2, ...].
    """
    rng = np.random.default_rng(cfg.init_seed)
    weights = []
    for fan_in, fan_out in zip(cfg.layer_widths[:-1], cfg.layer_widths[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
        weights.append(np.zeros(fan_out))
    return weights


def weight_count(layer_widths) -> int:
    return sum(a * b + b for a, b in zip(layer_widths[:-1], layer_widths[1:]))


def pack_weights(weights) -> np.ndarray:
    return np.concatenate([w.reshape(-1) for w in weights])


def unpack_weights(flat, layer_widths) -> list[np.ndarray]:
    flat = np.asarray(flat, dtype=np.float64)
    if flat.size != weight_count(layer_widths):
        raise ShapeMismatch(
            f"flat vector of size {flat.size} does not match widths {tuple(layer_widths)}"
        )
    weights, k = [], 0
    for fan_in, fan_out in zip(layer_widths[:-1], layer_widths[1:]):
        weights.append(flat[k:k + fan_in * fan_out].reshape(fan_in, fan_out))
        k += fan_in * fan_out
        weights.append(flat[k:k + fan_out])
        k += fan_out
    return weights


def _activate(z, activation):
    return np.maximum(z, 0.0) if activation == "relu" else np.tanh(z)


def mlp_forward(cfg: EncoderConfig, weights, batch) -> tuple[np.ndarray, ForwardCache]:
    """Affine -> activation per hidden layer, plain affine for the last layer."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cfg.layer_widths[0]:
        raise ShapeMismatch(f"batch {x.shape} does not match input width {cfg.layer_widths[0]}")
    n_layers = len(cfg.layer_widths) - 1
    inputs, pres = [], []
    h = x
    for layer in range(n_layers):
        W, b = weights[2 * layer], weights[2 * layer + 1]
        if W.shape != (cfg.layer_widths[layer], cfg.layer_widths[layer + 1]):
            raise ShapeMismatch(f"layer {layer} weight shape {W.shape}")
        inputs.append(h)
        z = h @ W + b
        pres.append(z)
        h = _activate(z, cfg.activation) if layer < n_layers - 1 else z
    cache = ForwardCache(weights=list(weights), inputs=inputs,
                         pre_activations=pres, activation=cfg.activation)
    return h, cache


def mlp_backward(cache: ForwardCache, grad_embeddings) -> list[np.ndarray]:
    """Exact reverse-mode gradients for every weight and bias.

    The cache must come from the matching forward pass over the current
    weight arrays; a cache captured before an optimizer step is stale.
    """
    if tuple(id(w) for w in cache.weights) != cache._ids:
        raise StaleCache("weights changed since the forward pass")
    g = np.asarray(grad_embeddings, dtype=np.float64)
    n_layers = len(cache.inputs)
    grads = [None] * (2 * n_layers)
    d = g
    for layer in range(n_layers - 1, -1, -1):
        grads[2 * layer] = cache.inputs[layer].T @ d
        grads[2 * layer + 1] = d.sum(axis=0)
        if layer > 0:
            d = d @ cache.weights[2 * layer].T
            z = cache.pre_activations[layer - 1]
            if cache.activation == "relu":
                d = d * (z > 0)
            else:
                t = np.tanh(z)
                d = d * (1.0 - t * t)
    return grads


def sgd_step(weights, grads, velocity, lr, momentum, weight_decay):
    """v <- momentum*v + (g + wd*w);  w <- w - lr*v. Returns new lists."""
    new_w, new_v = [], []
    for w, g, v in zip(weights, grads, velocity):
        v = momentum * v + (g + weight_decay * w)
        new_v.append(v)
        new_w.append(w - lr * v)
    return new_w, new_v


def cosine_lr(step: int, total_steps: int, lr0: float) -> float:
    """Half-cosine decay from lr0 at step 0 to 0 at step == total_steps."""
    if total_steps < 1 or not 0 <= step <= total_steps:
        raise InvalidParams(f"need 0 <= step <= total_steps >= 1, got {step}/{total_steps}")
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))


def train_contrastive(dataset, enc_cfg: EncoderConfig, train_cfg: TrainConfig):
    """Run the contrastive loop and return (weights, RunReport).

    Per epoch: seeded shuffle, then for each mini-batch draw two augmented
    views, embed both, form the cosine-similarity matrix and apply the
    configured loss; gradients flow back through the normalization into
    the encoder. Partial trailing batches are dropped so every step sees
    the same number of negatives. The learnable scale t (when present)
    shares the optimizer step with the weights, minus weight decay.
    """
    features = dataset.features if isinstance(dataset, Dataset) else np.asarray(dataset, float)
    m = len(features)
    if m < train_cfg.batch_size:
        raise InvalidParams(f"dataset of {m} rows is smaller than batch_size {train_cfg.batch_size}")

    rng = np.random.default_rng(train_cfg.seed)
    weights = init_weights(enc_cfg)
    velocity = [np.zeros_like(w) for w in weights]
    param = train_cfg.loss
    t_value = param.t if param.kind == LEARNABLE_T else None
    t_velocity = 0.0

    steps_per_epoch = m // train_cfg.batch_size
    total_steps = train_cfg.epochs * steps_per_epoch
    global_step = 0
    trajectory, t_trajectory = [], []
    started = time.perf_counter()

    for _ in range(train_cfg.epochs):
        perm = rng.permutation(m)
        epoch_loss = 0.0
        for b in range(steps_per_epoch):
            batch = features[perm[b * train_cfg.batch_size:(b + 1) * train_cfg.batch_size]]
            view_a, view_b = make_views(batch, train_cfg.aug, rng)
            emb_a, cache_a = mlp_forward(enc_cfg, weights, view_a)
            emb_b, cache_b = mlp_forward(enc_cfg, weights, view_b)
            if not (np.all(np.isfinite(emb_a)) and np.all(np.isfinite(emb_b))):
                raise DivergedLoss(f"non-finite embeddings at step {global_step}")
            sims = cosine_similarity_matrix(emb_a, emb_b)
            assert np.abs(np.linalg.norm(l2_normalize(emb_a), axis=1) - 1.0).max() < 1e-12

            live = param if t_value is None else TemperatureParam.learnable(t_value)
            result = evaluate_loss(sims, live, reduction=train_cfg.reduction,
                                   symmetric=train_cfg.symmetric)
            if not np.isfinite(result.loss):
                raise DivergedLoss(f"loss became {result.loss!r} at step {global_step}")
            epoch_loss += result.loss

            grad_a, grad_b = backprop_to_embeddings(emb_a, emb_b, result.grad_sim)
            grads_a = mlp_backward(cache_a, grad_a)
            grads_b = mlp_backward(cache_b, grad_b)
            grads = [ga + gb for ga, gb in zip(grads_a, grads_b)]

            lr = cosine_lr(global_step, total_steps, train_cfg.lr0)
            weights, velocity = sgd_step(weights, grads, velocity, lr,
                                         train_cfg.momentum, train_cfg.weight_decay)
            if t_value is not None:
                t_velocity = train_cfg.momentum * t_velocity + result.grad_t
                t_value = t_value - lr * t_velocity
            global_step += 1
        trajectory.append(epoch_loss / steps_per_epoch)
        if t_value is not None:
            t_trajectory.append(float(t_value))

    report = RunReport(
        loss_trajectory=trajectory,
        wall_time=time.perf_counter() - started,
        config_echo={
            "encoder": asdict(enc_cfg),
            "train": asdict(train_cfg),
        },
        learnable_t_trajectory=t_trajectory if t_value is not None else None,
    )
    return weights, report


def embed_dataset(cfg: EncoderConfig, weights, features) -> np.ndarray:
    """Frozen-encoder embeddings, row-normalized for cosine evaluation."""
    out, _ = mlp_forward(cfg, weights, np.asarray(features, dtype=np.float64))
    return l2_normalize(out)
