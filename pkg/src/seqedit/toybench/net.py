"""Small dense classifier trained from scratch.

Rectifier MLP with softmax cross-entropy, hand-rolled backprop, and Adam
with decoupled weight decay. Parameters live in checkpoints under the names
"layer{i}.weight" / "layer{i}.bias" so they flow through the editing ops
unchanged. Math runs in float64 internally and is cast to float32 at the
checkpoint boundary; training is single-threaded and fully deterministic
given (initial checkpoint, data, config).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ..checkpoint import Checkpoint, KIND_MODEL
from ..errors import DivergenceError, ValidationError
from ..seeding import rng_for

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class ToyModelSpec:
    """Layer sizes of the classifier; everything else is fixed."""

    layer_dims: tuple = (8, 32, 32, 4)

    def __post_init__(self):
        if len(self.layer_dims) < 2 or any(d <= 0 for d in self.layer_dims):
            raise ValidationError(f"bad layer dims {self.layer_dims!r}")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    def param_names(self) -> list[str]:
        names = []
        for i in range(self.n_layers):
            names.append(f"layer{i}.weight")
            names.append(f"layer{i}.bias")
        return sorted(names)

    def hidden_layers(self) -> list[int]:
        return list(range(self.n_layers - 1))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    learning_rate: float
    batch_size: int = 64
    weight_decay: float = 0.1
    coupled_weight_decay: bool = False  # default is decoupled (applied in the update)
    trainable_mask: dict | None = None  # tensor name -> bool; None trains everything
    seed: int | np.random.SeedSequence = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValidationError(f"learning rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValidationError(f"batch size must be >= 1, got {self.batch_size}")
        if self.weight_decay < 0:
            raise ValidationError(f"weight decay must be >= 0, got {self.weight_decay}")


def init_checkpoint(spec: ToyModelSpec, master_seed: int = 42) -> Checkpoint:
    """Glorot-uniform weights, zero biases, drawn from the init substream."""
    rng = rng_for(master_seed, "init")
    tensors = {}
    dims = spec.layer_dims
    for i in range(spec.n_layers):
        fan_in, fan_out = dims[i], dims[i + 1]
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        tensors[f"layer{i}.weight"] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        tensors[f"layer{i}.bias"] = np.zeros(fan_out)
    return Checkpoint(tensors, {"kind": KIND_MODEL, "stage": "0"})


def _spec_from_params(params: dict) -> ToyModelSpec:
    dims = []
    i = 0
    while f"layer{i}.weight" in params:
        w = params[f"layer{i}.weight"]
        if not dims:
            dims.append(w.shape[0])
        dims.append(w.shape[1])
        i += 1
    if not dims:
        raise ValidationError("checkpoint holds no layer parameters")
    return ToyModelSpec(tuple(dims))


def model_spec_of(ckpt: Checkpoint) -> ToyModelSpec:
    """Recover layer sizes from a checkpoint's parameter names/shapes."""
    spec = _spec_from_params(ckpt.tensors)
    if sorted(ckpt.tensors) != spec.param_names():
        raise ValidationError(
            f"checkpoint names {sorted(ckpt.tensors)} do not match the layer naming scheme"
        )
    return spec


def _forward(params: dict, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Logits plus cached activations for backprop."""
    acts = [x]
    h = x
    n_layers = len(params) // 2
    for i in range(n_layers):
        z = h @ params[f"layer{i}.weight"] + params[f"layer{i}.bias"]
        if i < n_layers - 1:
            h = np.maximum(z, 0.0)
            acts.append(h)
        else:
            h = z
    return h, acts


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_value(params: dict, x: np.ndarray, y: np.ndarray) -> float:
    """Mean softmax cross-entropy of a batch."""
    logits, _ = _forward(params, x)
    logp = _log_softmax(logits)
    return float(-logp[np.arange(len(y)), y].mean())


def loss_and_grads(params: dict, x: np.ndarray, y: np.ndarray) -> tuple[float, dict]:
    """Mean cross-entropy and its gradient for every parameter tensor."""
    logits, acts = _forward(params, x)
    logp = _log_softmax(logits)
    n = len(y)
    loss = float(-logp[np.arange(n), y].mean())
    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = {}
    n_layers = len(params) // 2
    for i in range(n_layers - 1, -1, -1):
        grads[f"layer{i}.weight"] = acts[i].T @ delta
        grads[f"layer{i}.bias"] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params[f"layer{i}.weight"].T) * (acts[i] > 0)
    return loss, grads


def train(init: Checkpoint, data, cfg: TrainConfig) -> Checkpoint:
    """Mini-batch Adam over seeded shuffles of the dataset's training split.

    Tensors masked out by cfg.trainable_mask are returned bit-identical;
    a non-finite loss aborts with the offending epoch/batch.
    """
    model_spec_of(init)
    if isinstance(data, tuple):
        x_train, y_train = data
    else:
        x_train, y_train = data.train
    x_train = x_train.astype(np.float64)
    y_train = np.asarray(y_train)

    mask = cfg.trainable_mask or {}
    trainable = [n for n in init.tensors if mask.get(n, True)]
    frozen = [n for n in init.tensors if not mask.get(n, True)]
    if not trainable:
        raise ValidationError("trainable mask freezes every tensor")

    params = {n: init.tensors[n].astype(np.float64) for n in init.tensors}
    m_state = {n: np.zeros_like(params[n]) for n in trainable}
    v_state = {n: np.zeros_like(params[n]) for n in trainable}
    rng = np.random.default_rng(cfg.seed)
    lr, wd = cfg.learning_rate, cfg.weight_decay
    step = 0
    n = len(y_train)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for batch_idx, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            loss, grads = loss_and_grads(params, x_train[idx], y_train[idx])
            if not math.isfinite(loss):
                raise DivergenceError(epoch, batch_idx, loss)
            step += 1
            bc1 = 1.0 - ADAM_BETA1**step
            bc2 = 1.0 - ADAM_BETA2**step
            for name in trainable:
                g = grads[name]
                if cfg.coupled_weight_decay and wd:
                    g = g + wd * params[name]
                m_state[name] = ADAM_BETA1 * m_state[name] + (1 - ADAM_BETA1) * g
                v_state[name] = ADAM_BETA2 * v_state[name] + (1 - ADAM_BETA2) * g * g
                update = (m_state[name] / bc1) / (np.sqrt(v_state[name] / bc2) + ADAM_EPS)
                params[name] = params[name] - lr * update
                if wd and not cfg.coupled_weight_decay:
                    params[name] = params[name] - lr * wd * params[name]

    tensors = {n: init.tensors[n] for n in frozen}
    tensors.update({n: params[n].astype(np.float32) for n in trainable})
    return Checkpoint(tensors, dict(init.meta))


def evaluate(model: Checkpoint, split: tuple[np.ndarray, np.ndarray]) -> float:
    """Classification error in percent; argmax ties go to the lowest class index."""
    x, y = split
    if len(y) == 0:
        raise ValidationError("cannot evaluate on an empty split")
    spec = model_spec_of(model)
    if x.shape[1] != spec.input_dim:
        raise ValidationError(f"input dim {x.shape[1]} != model dim {spec.input_dim}")
    params = {n: a.astype(np.float64) for n, a in model.tensors.items()}
    logits, _ = _forward(params, x.astype(np.float64))
    pred = logits.argmax(axis=1)
    return 100.0 * float((pred != y).sum()) / len(y)
