"""Feed-forward neural machinery for the subset scorers.

Exactly three weight layers with relu hidden activations, softmax
cross-entropy, analytic backprop, and Adam or plain SGD updates. All math
runs in float64 so the finite-difference gradient check is meaningful.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimMismatch,
    EmptyDataset,
    IoFailure,
    LabelOutOfRange,
    MissingFile,
    SchemaViolation,
    ValidationError,
)
from .rng import substream

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class MLPParams:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"

    def __post_init__(self):
        if len(self.layer_dims) != 4:
            raise SchemaViolation("layer_dims", "expected [d_in, h1, h2, d_out]")
        if len(self.weights) != 3 or len(self.biases) != 3:
            raise SchemaViolation("weights", "expected exactly 3 weight layers")
        if self.activation != "relu":
            raise SchemaViolation("activation", f"unsupported activation {self.activation!r}")
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        for i in range(3):
            want = (self.layer_dims[i], self.layer_dims[i + 1])
            if self.weights[i].shape != want:
                raise SchemaViolation("weights", f"layer {i} expected shape {want}, got {self.weights[i].shape}")
            if self.biases[i].shape != (self.layer_dims[i + 1],):
                raise SchemaViolation("biases", f"layer {i} expected length {self.layer_dims[i + 1]}")
            if not (np.isfinite(self.weights[i]).all() and np.isfinite(self.biases[i]).all()):
                raise SchemaViolation("weights", f"non-finite parameter in layer {i}")

    def copy(self) -> "MLPParams":
        return MLPParams(
            layer_dims=list(self.layer_dims),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
        )


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise SchemaViolation("learning_rate", "must be > 0")
        if self.batch_size < 1:
            raise SchemaViolation("batch_size", "must be >= 1")
        if self.epochs < 0:
            raise SchemaViolation("epochs", "must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise SchemaViolation("optimizer", "must be 'adam' or 'sgd'")


def init_mlp(layer_dims: list[int], seed: int) -> MLPParams:
    """Glorot-uniform weights, zero biases, deterministic for a seed."""
    if len(layer_dims) != 4:
        raise ValidationError(
            f"layer_dims must list 4 sizes (input, two hidden, output), got {len(layer_dims)}"
        )
    rng = substream(seed, "mlp-init")
    weights, biases = [], []
    for i in range(3):
        fan_in, fan_out = layer_dims[i], layer_dims[i + 1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPParams(layer_dims=list(layer_dims), weights=weights, biases=biases)


def forward_batch(p: MLPParams, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Batched forward pass. Returns logits and cached activations."""
    a = x
    cache = [a]
    for i in range(3):
        z = a @ p.weights[i] + p.biases[i]
        if i < 2:
            a = np.maximum(z, 0.0)
            cache.extend([z, a])
        else:
            cache.append(z)
    return cache[-1], cache


def mlp_forward(p: MLPParams, x) -> np.ndarray:
    """Logits for a single input vector."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != p.layer_dims[0]:
        raise DimMismatch(f"input dim {v.shape} does not match d_in {p.layer_dims[0]}")
    logits, _ = forward_batch(p, v[None, :])
    return logits[0]


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy_loss(logits, label: int) -> float:
    """Negative log softmax probability of the labeled class."""
    z = np.asarray(logits, dtype=np.float64)
    if not (0 <= label < z.shape[-1]):
        raise LabelOutOfRange(f"label {label} for {z.shape[-1]} classes")
    m = z.max()
    log_z = m + np.log(np.exp(z - m).sum())
    return float(log_z - z[label])


@dataclass
class MLPGrads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


def backward_from_output_grad(p: MLPParams, cache: list[np.ndarray],
                              dout: np.ndarray) -> MLPGrads:
    """Parameter gradients given the loss gradient at the output layer.

    cache is the second return of forward_batch; dout has the shape of
    the logits. Used directly by the twin-tower scorer, whose loss sits on
    top of a dot product rather than a softmax.
    """
    x, z1, a1, z2, a2, _ = cache
    dz = dout
    dw3 = a2.T @ dz
    db3 = dz.sum(axis=0)
    da2 = dz @ p.weights[2].T
    dz2 = da2 * (z2 > 0)
    dw2 = a1.T @ dz2
    db2 = dz2.sum(axis=0)
    da1 = dz2 @ p.weights[1].T
    dz1 = da1 * (z1 > 0)
    dw1 = x.T @ dz1
    db1 = dz1.sum(axis=0)
    return MLPGrads(weights=[dw1, dw2, dw3], biases=[db1, db2, db3])


def _backward_batch(p: MLPParams, cache: list[np.ndarray],
                    labels: np.ndarray) -> MLPGrads:
    """Gradients of mean cross-entropy over the batch."""
    logits = cache[-1]
    n = logits.shape[0]
    dz = softmax(logits)
    dz[np.arange(n), labels] -= 1.0
    dz /= n
    return backward_from_output_grad(p, cache, dz)


def mlp_backward(p: MLPParams, x, label: int) -> MLPGrads:
    """Exact gradients of cross_entropy_loss(mlp_forward(p, x), label)."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != p.layer_dims[0]:
        raise DimMismatch(f"input dim {v.shape} does not match d_in {p.layer_dims[0]}")
    if not (0 <= label < p.layer_dims[-1]):
        raise LabelOutOfRange(f"label {label} for {p.layer_dims[-1]} classes")
    _, cache = forward_batch(p, v[None, :])
    return _backward_batch(p, cache, np.asarray([label]))


def gradient_check(p: MLPParams, x, label: int, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error uses max(|analytic|, |numeric|, 1e-3) in the denominator
    so near-zero components do not dominate.
    """
    v = np.asarray(x, dtype=np.float64)
    analytic = mlp_backward(p, v, label)
    flat_params = p.weights + p.biases
    flat_grads = analytic.weights + analytic.biases
    worst = 0.0
    for arr, grad in zip(flat_params, flat_grads):
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            up = cross_entropy_loss(mlp_forward(p, v), label)
            arr[idx] = orig - h
            down = cross_entropy_loss(mlp_forward(p, v), label)
            arr[idx] = orig
            num = (up - down) / (2.0 * h)
            denom = max(abs(grad[idx]), abs(num), 1e-3)
            worst = max(worst, abs(grad[idx] - num) / denom)
            it.iternext()
    return worst


def _coerce_dataset(data) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, tuple) and len(data) == 2:
        xs, ys = data
    else:
        pairs = list(data)
        if not pairs:
            raise EmptyDataset("no training examples")
        xs = [p[0] for p in pairs]
        ys = [p[1] for p in pairs]
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyDataset("no training examples")
    if y.shape != (x.shape[0],):
        raise DimMismatch("labels do not align with examples")
    return x, y


def train(p: MLPParams, data, cfg: TrainConfig) -> tuple[MLPParams, list[float]]:
    """Minibatch training. Returns new parameters and a per-epoch loss trace.

    The trace holds the mean per-example cross-entropy seen during each
    epoch. Shuffling, batching, and updates are fully determined by
    cfg.seed. With epochs=0 the parameters are returned unchanged.
    """
    x, y = _coerce_dataset(data)
    if x.shape[1] != p.layer_dims[0]:
        raise DimMismatch(f"example dim {x.shape[1]} does not match d_in {p.layer_dims[0]}")
    if int(y.max(initial=0)) >= p.layer_dims[-1] or int(y.min(initial=0)) < 0:
        raise LabelOutOfRange("label outside output layer range")
    params = p.copy()
    if cfg.epochs == 0:
        return params, []
    rng = substream(cfg.seed, "train-shuffle")
    adam_m = [np.zeros_like(w) for w in params.weights + params.biases]
    adam_v = [np.zeros_like(w) for w in params.weights + params.biases]
    step = 0
    trace: list[float] = []
    n = x.shape[0]
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start: start + cfg.batch_size]
            bx, by = x[batch], y[batch]
            logits, cache = forward_batch(params, bx)
            probs = softmax(logits)
            batch_loss = float(-np.log(probs[np.arange(len(batch)), by]).sum())
            epoch_loss += batch_loss
            grads = _backward_batch(params, cache, by)
            step += 1
            flat = params.weights + params.biases
            gflat = grads.weights + grads.biases
            if cfg.optimizer == "adam":
                for j, (arr, g) in enumerate(zip(flat, gflat)):
                    adam_m[j] = ADAM_BETA1 * adam_m[j] + (1 - ADAM_BETA1) * g
                    adam_v[j] = ADAM_BETA2 * adam_v[j] + (1 - ADAM_BETA2) * g * g
                    m_hat = adam_m[j] / (1 - ADAM_BETA1 ** step)
                    v_hat = adam_v[j] / (1 - ADAM_BETA2 ** step)
                    arr -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
            else:
                for arr, g in zip(flat, gflat):
                    arr -= cfg.learning_rate * g
        trace.append(epoch_loss / n)
    return params, trace


def accuracy(p: MLPParams, data) -> float:
    """Fraction of examples whose argmax logit matches the label."""
    x, y = _coerce_dataset(data)
    logits, _ = forward_batch(p, x)
    return float((logits.argmax(axis=1) == y).mean())


# --- persistence ----------------------------------------------------------------

def mlp_to_dict(p: MLPParams, mode: str) -> dict:
    return {
        "layer_dims": list(p.layer_dims),
        "weights": [w.tolist() for w in p.weights],
        "biases": [b.tolist() for b in p.biases],
        "activation": p.activation,
        "mode": mode,
    }


def mlp_from_dict(obj: dict) -> tuple[MLPParams, str]:
    for key in ("layer_dims", "weights", "biases", "activation", "mode"):
        if key not in obj:
            raise SchemaViolation(key, "missing model field")
    params = MLPParams(
        layer_dims=[int(d) for d in obj["layer_dims"]],
        weights=[np.asarray(w, dtype=np.float64) for w in obj["weights"]],
        biases=[np.asarray(b, dtype=np.float64) for b in obj["biases"]],
        activation=obj["activation"],
    )
    return params, obj["mode"]


def save_mlp(p: MLPParams, path, mode: str) -> None:
    try:
        Path(path).write_text(
            json.dumps(mlp_to_dict(p, mode), indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_mlp(path) -> tuple[MLPParams, str]:
    p = Path(path)
    if not p.is_file():
        raise MissingFile(p)
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaViolation("$", f"model file not valid JSON: {exc}") from exc
    return mlp_from_dict(obj)
