"""Linear classifier trained by SGD on the modified Huber loss."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from ..randomness import make_rng
from .data import Sample, fingerprint, max_normalize, stack

log = logging.getLogger(__name__)

__all__ = [
    "TrainingFailedError",
    "modified_huber_loss",
    "LinearClassifier",
    "stratified_split",
    "prepare_features",
    "train_svm",
]

ACCURACY_FLOOR = 0.9


class TrainingFailedError(RuntimeError):
    pass


def modified_huber_loss(margin):
    """
    Loss and derivative with respect to the margin z = y f(x).

    (1 - z)^2 clipped at zero for z >= -1, the line -4z below. Works on
    scalars and arrays alike.
    """
    z = np.asarray(margin, dtype=float)
    hinge = np.maximum(0.0, 1.0 - z)
    quad = z >= -1.0
    loss = np.where(quad, hinge * hinge, -4.0 * z)
    grad = np.where(quad, -2.0 * hinge, -4.0)
    if loss.ndim == 0:
        return float(loss), float(grad)
    return loss, grad


def prepare_features(samples: Sequence[Sample], normalize: bool) -> NDArray[np.float64]:
    if normalize:
        samples = [max_normalize(s) for s in samples]
    return np.vstack([s.features for s in samples])


def stratified_split(
    labels: NDArray[np.int64], fraction: float, rng: np.random.Generator
) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    """
    Train and holdout indices with ``fraction`` of every class held out.

    One permutation of all indices is drawn and each class keeps its first
    members in that order for the holdout, so relabelling the classes does
    not change the split.
    """
    perm = rng.permutation(len(labels))
    held = []
    for cls in np.unique(labels):
        members = perm[labels[perm] == cls]
        if len(members) < 2:
            raise ValueError(f"need at least 2 samples of class {cls}, got {len(members)}")
        k = int(round(fraction * len(members)))
        k = min(max(k, 1 if fraction > 0 else 0), len(members) - 1)
        held.append(members[:k])
    held_idx = np.sort(np.concatenate(held)) if held else np.empty(0, dtype=np.int64)
    mask = np.ones(len(labels), dtype=bool)
    mask[held_idx] = False
    return np.nonzero(mask)[0], held_idx


@dataclass
class LinearClassifier:
    """
    f(x) = w.x + b; p(localized) = (clip(f, -1, 1) + 1) / 2.

    ``normalization`` records whether inputs are max-normalized before scoring.
    """

    weights: NDArray[np.float64]
    bias: float
    normalization: str = "sum"
    hyperparameters: dict = field(default_factory=dict)
    data_fingerprint: str = ""
    holdout_accuracy: float | None = None
    warning: str | None = None

    kind = "svm"

    def _inputs(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.normalization == "max":
            peak = X.max(axis=1, keepdims=True)
            if np.any(peak <= 0):
                raise ValueError("cannot max-normalize an all-zero input")
            X = X / peak
        return X

    def decision_function(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        return self._inputs(X) @ self.weights + self.bias

    def predict_proba(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        """Columns (p_delocalized, p_localized)."""
        p_loc = (np.clip(self.decision_function(X), -1.0, 1.0) + 1.0) / 2.0
        return np.column_stack([1.0 - p_loc, p_loc])

    def predict(self, X: NDArray[np.float64]) -> NDArray[np.int64]:
        return (self.decision_function(X) > 0).astype(np.int64)


def _sgd(
    X: NDArray[np.float64],
    y: NDArray[np.float64],
    epochs: int,
    eta0: float,
    alpha: float,
    rng: np.random.Generator,
) -> tuple[NDArray[np.float64], float]:
    w = np.zeros(X.shape[1])
    b = 0.0
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(len(y)):
            eta = eta0 / (1.0 + eta0 * alpha * t)
            xi, yi = X[i], y[i]
            z = yi * (float(xi @ w) + b)
            if z >= 1.0:
                dz = 0.0
            elif z >= -1.0:
                dz = -2.0 * (1.0 - z)
            else:
                dz = -4.0
            # the intercept is not penalized
            w *= 1.0 - eta * alpha
            if dz != 0.0:
                w -= (eta * dz * yi) * xi
                b -= eta * dz * yi
            t += 1
        if not (np.all(np.isfinite(w)) and np.isfinite(b)):
            raise TrainingFailedError("SGD diverged (non-finite weights)")
    return w, b


def train_svm(
    samples: Sequence[Sample],
    epochs: int = 50,
    eta0: float = 0.01,
    l2_penalty: float = 1e-4,
    holdout_fraction: float = 0.2,
    seed: int = 0,
    normalize: bool = False,
) -> tuple[LinearClassifier, float]:
    """
    Fit the linear classifier and report accuracy on a stratified holdout.

    The learning rate decays as eta0 / (1 + eta0 * l2_penalty * t) over the
    update count t; samples are reshuffled every epoch. A holdout accuracy
    below 0.9 attaches a warning to the returned model.
    """
    X = prepare_features(samples, normalize)
    _, labels = stack(samples)
    rng = make_rng(seed)
    train_idx, hold_idx = stratified_split(labels, holdout_fraction, rng)
    signs = np.where(labels == 1, 1.0, -1.0)
    w, b = _sgd(X[train_idx], signs[train_idx], epochs, eta0, l2_penalty, rng)
    model = LinearClassifier(
        weights=w,
        bias=float(b),
        normalization="max" if normalize else "sum",
        hyperparameters={
            "epochs": epochs,
            "eta0": eta0,
            "l2_penalty": l2_penalty,
            "holdout_fraction": holdout_fraction,
            "seed": seed,
            "schedule": "eta0/(1+eta0*l2_penalty*t)",
        },
        data_fingerprint=fingerprint(X, labels),
    )
    eval_idx = hold_idx if len(hold_idx) else train_idx
    acc = float(np.mean((X[eval_idx] @ w + b > 0).astype(np.int64) == labels[eval_idx]))
    model.holdout_accuracy = acc
    if acc < ACCURACY_FLOOR:
        model.warning = f"training failed: holdout accuracy {acc:.3f} < {ACCURACY_FLOOR}"
        log.warning("SVM %s", model.warning)
    return model, acc
