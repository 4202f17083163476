"""Students: least squares, k-nearest neighbours and a small numpy MLP."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .datamodel import Dataset
from .errors import ConfigurationError, DimensionError, TrainingError


@dataclass(frozen=True)
class MLPConfig:
    hidden_layers: tuple = (128, 128)
    activation: str = "relu"
    optimizer: str = "adam"
    learning_rate: float = 1e-4
    batch_size: int = 64
    max_epochs: int = 50
    early_stop_tol: float = 1e-4
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        counts = (*self.hidden_layers, self.batch_size, self.max_epochs, self.patience)
        if not self.hidden_layers or any(c < 1 for c in counts):
            raise ConfigurationError(f"MLP counts must all be >= 1: {self}")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if not self.early_stop_tol > 0:
            raise ConfigurationError("early_stop_tol must be positive")
        if self.activation != "relu":
            raise ConfigurationError(f"unsupported activation {self.activation!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")


FAVORABLE = MLPConfig(hidden_layers=(128, 128), optimizer="adam")
UNFAVORABLE = MLPConfig(hidden_layers=(32,), optimizer="sgd")


@dataclass
class TrainedModel:
    """A fitted student.  ``parameters`` holds plain numpy arrays keyed by name."""

    kind: str
    parameters: dict
    training_log: list = field(default_factory=list)

    def predict(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs.reshape(-1, 1)
        if self.kind == "linear":
            return xs @ self.parameters["coef"] + self.parameters["intercept"]
        if self.kind == "knn":
            return _knn_predict(self.parameters["xs"], self.parameters["ys"], int(self.parameters["k"]), xs)
        if self.kind == "mlp":
            return mlp_forward(_weights(self.parameters), xs)
        raise ConfigurationError(f"unknown model kind {self.kind!r}")

    __call__ = predict

    def to_json(self) -> str:
        params = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.parameters.items()}
        return json.dumps({"kind": self.kind, "parameters": params,
                           "training_log": [list(e) for e in self.training_log]})

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        obj = json.loads(text)
        params = {k: (np.array(v, dtype=float) if isinstance(v, list) else v)
                  for k, v in obj["parameters"].items()}
        return cls(obj["kind"], params, [tuple(e) for e in obj.get("training_log", [])])


# ---------------------------------------------------------------------------
# linear least squares

def fit_linear(train: Dataset, jitter: float = 1e-10) -> TrainedModel:
    """Ordinary least squares with intercept via ridge-jittered normal equations."""
    n, p = train.xs.shape
    a = np.hstack([train.xs, np.ones((n, 1))])
    gram = a.T @ a + jitter * np.eye(p + 1)
    sol = np.linalg.solve(gram, a.T @ train.ys)
    return TrainedModel("linear", {"coef": sol[:p], "intercept": sol[p]})


# ---------------------------------------------------------------------------
# k nearest neighbours

def fit_knn(train: Dataset, k: int) -> TrainedModel:
    if not 1 <= k <= train.n:
        raise ConfigurationError(f"k must lie in [1, {train.n}], got {k}")
    return TrainedModel("knn", {"xs": np.array(train.xs), "ys": np.array(train.ys), "k": int(k)})


def _knn_predict(xs_train, ys_train, k, queries, chunk=512):
    out = np.empty((queries.shape[0], ys_train.shape[1]))
    for start in range(0, queries.shape[0], chunk):
        qs = queries[start:start + chunk]
        d2 = ((qs[:, None, :] - xs_train[None, :, :]) ** 2).sum(axis=2)
        # stable sort: equal distances resolve to the lower training index
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
        out[start:start + chunk] = ys_train[nearest].mean(axis=1)
    return out


# ---------------------------------------------------------------------------
# multilayer perceptron

def _weights(parameters: dict) -> list:
    n_layers = sum(1 for k in parameters if k.startswith("W"))
    return [(parameters[f"W{i}"], parameters[f"b{i}"]) for i in range(n_layers)]


def init_mlp(sizes: Sequence[int], rng: np.random.Generator) -> list:
    """Uniform(-s, s) weights with ``s = sqrt(6 / (fan_in + fan_out))``, zero biases."""
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        s = math.sqrt(6.0 / (fan_in + fan_out))
        layers.append((rng.uniform(-s, s, size=(fan_in, fan_out)), np.zeros(fan_out)))
    return layers


def mlp_forward(layers, xs) -> np.ndarray:
    h = xs
    for W, b in layers[:-1]:
        h = np.maximum(h @ W + b, 0.0)
    W, b = layers[-1]
    return h @ W + b


def mlp_loss_and_grad(layers, xs, ys):
    """Mean squared error over all output entries and its gradient."""
    acts = [xs]
    h = xs
    for W, b in layers[:-1]:
        h = np.maximum(h @ W + b, 0.0)
        acts.append(h)
    W, b = layers[-1]
    diff = h @ W + b - ys
    loss = float(np.mean(diff**2))
    delta = 2.0 * diff / diff.size
    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        a = acts[i]
        grads[i] = (a.T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ W.T) * (a > 0)
    return loss, grads


class _Adam:
    def __init__(self, layers, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in layers]
        self.v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in layers]

    def step(self, layers, grads):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for params, g, m, v in zip(layers, grads, self.m, self.v):
            for p_, g_, m_, v_ in zip(params, g, m, v):
                m_ *= self.b1
                m_ += (1.0 - self.b1) * g_
                v_ *= self.b2
                v_ += (1.0 - self.b2) * g_ * g_
                p_ -= self.lr * (m_ / c1) / (np.sqrt(v_ / c2) + self.eps)


class _SGD:
    def __init__(self, layers, lr):
        self.lr = lr

    def step(self, layers, grads):
        for params, g in zip(layers, grads):
            for p_, g_ in zip(params, g):
                p_ -= self.lr * g_


def fit_mlp(train: Dataset, val: Dataset, cfg: MLPConfig = FAVORABLE) -> TrainedModel:
    """Minibatch training with early stopping on the validation loss.

    Training stops once the best validation loss has not improved by more
    than ``early_stop_tol`` for ``patience`` consecutive epochs.  The
    returned weights are those of the epoch with the lowest validation loss.
    """
    if train.p != val.p or train.q != val.q:
        raise DimensionError("train and validation sets have different shapes")
    root = np.random.SeedSequence(cfg.seed)
    layers = init_mlp([train.p, *cfg.hidden_layers, train.q], np.random.default_rng(root.spawn(1)[0]))
    opt = _Adam(layers, cfg.learning_rate) if cfg.optimizer == "adam" else _SGD(layers, cfg.learning_rate)
    xs, ys = np.asarray(train.xs), np.asarray(train.ys)
    n = train.n

    log = []
    best_val = math.inf
    best_layers = copy.deepcopy(layers)
    patience_ref = math.inf
    stale = 0
    for epoch in range(cfg.max_epochs):
        order = np.random.default_rng([cfg.seed, epoch + 1]).permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = mlp_loss_and_grad(layers, xs[batch], ys[batch])
            if not math.isfinite(loss):
                raise TrainingError(f"training loss diverged in epoch {epoch}", epoch=epoch)
            total += loss * batch.size
            opt.step(layers, grads)
        with np.errstate(over="ignore", invalid="ignore"):
            val_loss = float(np.mean((mlp_forward(layers, val.xs) - val.ys) ** 2))
        if not math.isfinite(val_loss):
            raise TrainingError(f"validation loss diverged in epoch {epoch}", epoch=epoch)
        log.append((total / n, val_loss))
        if val_loss < best_val:
            best_val = val_loss
            best_layers = copy.deepcopy(layers)
        if val_loss < patience_ref - cfg.early_stop_tol:
            patience_ref = val_loss
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break

    params = {}
    for i, (W, b) in enumerate(best_layers):
        params[f"W{i}"] = W
        params[f"b{i}"] = b
    return TrainedModel("mlp", params, log)


def training_log_csv(model: TrainedModel) -> str:
    lines = ["epoch,train_loss,val_loss"]
    lines += [f"{i},{tr!r},{va!r}" for i, (tr, va) in enumerate(model.training_log)]
    return "\n".join(lines) + "\n"
