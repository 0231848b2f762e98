"""Feed-forward ReLU network with softmax output, trained by backpropagation and Adam."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from ..randomness import make_rng
from .data import Sample, fingerprint, stack
from .svm import ACCURACY_FLOOR, TrainingFailedError, prepare_features, stratified_split

log = logging.getLogger(__name__)

__all__ = [
    "MlpClassifier",
    "init_params",
    "forward",
    "loss_and_grads",
    "train_mlp",
    "grid_search_mlp",
]

Params = tuple[list[NDArray[np.float64]], list[NDArray[np.float64]]]


def init_params(layer_sizes: Sequence[int], rng: np.random.Generator) -> Params:
    """Glorot-uniform weights and biases, bound sqrt(6 / (fan_in + fan_out))."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, fan_out))
    return weights, biases


def _softmax(z: NDArray[np.float64]) -> NDArray[np.float64]:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(weights, biases, X: NDArray[np.float64]) -> list[NDArray[np.float64]]:
    """Activations of every layer, input first and softmax output last."""
    acts = [X]
    h = X
    last = len(weights) - 1
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = h @ W + b
        h = _softmax(z) if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def _penalty(weights, alpha: float, batch: int) -> float:
    return 0.5 * alpha * sum(float(np.sum(W * W)) for W in weights) / batch


def _cross_entropy(probs: NDArray[np.float64], y: NDArray[np.int64]) -> float:
    p = np.clip(probs[np.arange(len(y)), y], 1e-300, 1.0)
    return float(-np.mean(np.log(p)))


def loss_and_grads(weights, biases, X, y, alpha: float = 0.0):
    """
    Mean cross-entropy plus (alpha / 2B) * sum ||W||^2 over a batch of size B,
    and its gradients with respect to every weight matrix and bias vector.
    """
    B = len(y)
    acts = forward(weights, biases, X)
    loss = _cross_entropy(acts[-1], y) + _penalty(weights, alpha, B)
    delta = acts[-1].copy()
    delta[np.arange(B), y] -= 1.0
    delta /= B
    g_w = [None] * len(weights)
    g_b = [None] * len(weights)
    for i in range(len(weights) - 1, -1, -1):
        g_w[i] = acts[i].T @ delta + (alpha / B) * weights[i]
        g_b[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ weights[i].T) * (acts[i] > 0)
    return loss, g_w, g_b


@dataclass
class MlpClassifier:
    layer_sizes: tuple[int, ...]
    weights: list[NDArray[np.float64]]
    biases: list[NDArray[np.float64]]
    l2_alpha: float = 0.001
    normalization: str = "max"
    hyperparameters: dict = field(default_factory=dict)
    data_fingerprint: str = ""
    holdout_accuracy: float | None = None
    warning: str | None = None

    kind = "mlp"

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("one weight matrix and bias vector per layer transition")
        for W, b, n_in, n_out in zip(self.weights, self.biases, sizes[:-1], sizes[1:]):
            if W.shape != (n_in, n_out) or b.shape != (n_out,):
                raise ValueError(f"layer shapes do not chain: {W.shape}, {b.shape} vs ({n_in}, {n_out})")
        self.layer_sizes = sizes

    def _inputs(self, X) -> NDArray[np.float64]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.normalization == "max":
            peak = X.max(axis=1, keepdims=True)
            if np.any(peak <= 0):
                raise ValueError("cannot max-normalize an all-zero input")
            X = X / peak
        return X

    def predict_proba(self, X) -> NDArray[np.float64]:
        """Columns (p_delocalized, p_localized)."""
        return forward(self.weights, self.biases, self._inputs(X))[-1]

    def predict(self, X) -> NDArray[np.int64]:
        return np.argmax(self.predict_proba(X), axis=1).astype(np.int64)


def _fit(
    X: NDArray[np.float64],
    y: NDArray[np.int64],
    layer_sizes: Sequence[int],
    alpha: float,
    rng: np.random.Generator,
    batch_size: int,
    learning_rate: float,
    patience: int,
    max_epochs: int,
    validation_fraction: float,
    tol: float = 1e-4,
) -> tuple[Params, int]:
    fit_idx, val_idx = stratified_split(y, validation_fraction, rng)
    Xf, yf = X[fit_idx], y[fit_idx]
    Xv, yv = X[val_idx], y[val_idx]
    weights, biases = init_params(layer_sizes, rng)
    params = weights + biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    best_loss = math.inf
    best = ([W.copy() for W in weights], [b.copy() for b in biases])
    stale = 0
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        order = rng.permutation(len(yf))
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            loss, g_w, g_b = loss_and_grads(weights, biases, Xf[idx], yf[idx], alpha)
            if not math.isfinite(loss):
                raise TrainingFailedError("MLP training diverged (loss is not finite)")
            step += 1
            lr = learning_rate * math.sqrt(1.0 - beta2**step) / (1.0 - beta1**step)
            for k, g in enumerate(g_w + g_b):
                m[k] *= beta1
                m[k] += (1.0 - beta1) * g
                v[k] *= beta2
                v[k] += (1.0 - beta2) * g * g
                params[k] -= lr * m[k] / (np.sqrt(v[k]) + eps)
        probs = forward(weights, biases, Xv)[-1]
        val_loss = _cross_entropy(probs, yv) + _penalty(weights, alpha, len(yv))
        if not math.isfinite(val_loss):
            raise TrainingFailedError("MLP training diverged (validation loss is not finite)")
        if val_loss < best_loss - tol:
            best_loss = val_loss
            best = ([W.copy() for W in weights], [b.copy() for b in biases])
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break
    return best, epoch


def train_mlp(
    samples: Sequence[Sample],
    layer_sizes: Sequence[int] = (400, 200, 100, 50),
    l2_alpha: float = 0.001,
    holdout_fraction: float = 0.2,
    seed: int = 0,
    batch_size: int = 64,
    learning_rate: float = 1e-3,
    patience: int = 10,
    max_epochs: int = 300,
    validation_fraction: float = 0.1,
    normalize: bool = True,
) -> tuple[MlpClassifier, float]:
    """
    Train on the non-holdout samples with early stopping on a validation split.

    ``layer_sizes`` lists the hidden layers; input width and the 2-way output
    are added. The weights with the lowest validation loss are kept.
    """
    X = prepare_features(samples, normalize)
    _, labels = stack(samples)
    rng = make_rng(seed)
    train_idx, hold_idx = stratified_split(labels, holdout_fraction, rng)
    sizes = (X.shape[1], *[int(h) for h in layer_sizes], 2)
    (weights, biases), epochs = _fit(
        X[train_idx], labels[train_idx], sizes, l2_alpha, rng,
        batch_size, learning_rate, patience, max_epochs, validation_fraction,
    )
    model = MlpClassifier(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        l2_alpha=l2_alpha,
        normalization="max" if normalize else "sum",
        hyperparameters={
            "batch_size": batch_size,
            "learning_rate": learning_rate,
            "optimizer": "adam",
            "patience": patience,
            "max_epochs": max_epochs,
            "epochs_run": epochs,
            "validation_fraction": validation_fraction,
            "holdout_fraction": holdout_fraction,
            "seed": seed,
        },
        data_fingerprint=fingerprint(X, labels),
    )
    eval_idx = hold_idx if len(hold_idx) else train_idx
    pred = np.argmax(forward(weights, biases, X[eval_idx])[-1], axis=1)
    acc = float(np.mean(pred == labels[eval_idx]))
    model.holdout_accuracy = acc
    if acc < ACCURACY_FLOOR:
        model.warning = f"training failed: holdout accuracy {acc:.3f} < {ACCURACY_FLOOR}"
        log.warning("MLP %s", model.warning)
    return model, acc


def grid_search_mlp(
    samples: Sequence[Sample],
    layer_candidates: Iterable[Sequence[int]],
    alpha_candidates: Iterable[float],
    seed: int = 0,
    **kwargs,
) -> tuple[MlpClassifier, list[tuple[tuple[int, ...], float, float]]]:
    """
    Train every (hidden layers, alpha) pair and keep the best holdout accuracy.

    Ties keep the earliest candidate. Returns the best model and the table of
    (layers, alpha, accuracy) rows in search order.
    """
    table = []
    best_model, best_acc = None, -1.0
    alphas = list(alpha_candidates)
    for layers in layer_candidates:
        for alpha in alphas:
            model, acc = train_mlp(samples, layers, alpha, seed=seed, **kwargs)
            table.append((tuple(int(h) for h in layers), float(alpha), acc))
            if acc > best_acc:
                best_model, best_acc = model, acc
    if best_model is None:
        raise ValueError("empty hyper-parameter grid")
    return best_model, table
