"""Locate the transition where a trained classifier is maximally confused."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from ..core import WalkConfig
from ..detect import DetectionError, default_param_max, param_grid
from ..randomness import derive_seed, ensemble_mean, make_model
from .data import generate_training_set, simulate_distributions
from .mlp import train_mlp
from .svm import train_svm

__all__ = [
    "NoTransitionError",
    "ConfusionCurve",
    "crossing_rule",
    "first_below_rule",
    "default_rule",
    "confusion_curve",
    "scan_curve",
    "confusion_scan",
    "sample_size_study",
]


class NoTransitionError(DetectionError):
    """The delocalized probability never drops through 1/2 on the scanned grid."""


@dataclass(frozen=True)
class ConfusionCurve:
    param_values: NDArray[np.float64]
    p_delocalized: NDArray[np.float64]

    def __post_init__(self) -> None:
        if len(self.param_values) != len(self.p_delocalized):
            raise ValueError("param_values and p_delocalized must align")
        if np.any(np.diff(self.param_values) <= 0):
            raise ValueError("param_values must be strictly ascending")
        p = self.p_delocalized
        if np.any((p < 0) | (p > 1)):
            raise ValueError("probabilities must lie in [0, 1]")


def crossing_rule(params: Sequence[float], p_deloc: Sequence[float]) -> float:
    """
    First downward crossing of 1/2, interpolated linearly between the
    bracketing grid points (used for the linear classifier).
    """
    x = np.asarray(params, dtype=float)
    p = np.asarray(p_deloc, dtype=float)
    if len(p) == 0 or p[0] < 0.5:
        raise NoTransitionError("curve does not start on the delocalized side")
    for k in range(len(p) - 1):
        if p[k] >= 0.5 > p[k + 1]:
            if p[k] == 0.5:
                return float(x[k])
            frac = (p[k] - 0.5) / (p[k] - p[k + 1])
            return float(x[k] + frac * (x[k + 1] - x[k]))
    raise NoTransitionError("classification probability never falls below 1/2")


def first_below_rule(params: Sequence[float], p_deloc: Sequence[float]) -> float:
    """First grid point with p(delocalized) < 1/2 (used for the network)."""
    x = np.asarray(params, dtype=float)
    p = np.asarray(p_deloc, dtype=float)
    below = np.nonzero(p < 0.5)[0]
    if len(below) == 0 or below[0] == 0:
        raise NoTransitionError("no transition from delocalized to localized on the grid")
    return float(x[below[0]])


def default_rule(classifier):
    return crossing_rule if getattr(classifier, "kind", "svm") == "svm" else first_below_rule


def confusion_curve(classifier, params: Sequence[float], distributions: NDArray[np.float64]) -> ConfusionCurve:
    probs = classifier.predict_proba(np.asarray(distributions, dtype=float))
    return ConfusionCurve(np.asarray(params, dtype=float), np.clip(probs[:, 0], 0.0, 1.0))


def scan_curve(
    classifier,
    model_kind: str,
    params: Sequence[float],
    n_t: int,
    seed: int,
    theta0: float = math.pi / 6,
    n_max: int | None = None,
    n_realizations: int = 1,
    coin_phis: tuple[float, float] = (math.pi / 2, math.pi / 2),
) -> ConfusionCurve:
    """
    Classify one realization (stream ``seed``, shared by every grid point) or
    an ensemble mean per magnitude.
    """
    params = np.asarray(params, dtype=float)
    config = WalkConfig(n_max or n_t, n_t, theta0, coin_phis, seed)
    if n_realizations <= 1:
        dists = simulate_distributions(config, model_kind, params, [seed] * len(params))
    else:
        dists = np.vstack([
            ensemble_mean(config, make_model(model_kind, p), n_realizations).final_distribution
            for p in params
        ])
    return confusion_curve(classifier, params, dists)


def confusion_scan(
    classifier,
    model_kind: str,
    params: Sequence[float],
    n_t: int,
    seed: int,
    theta0: float = math.pi / 6,
    n_max: int | None = None,
    rule=None,
    n_realizations: int = 1,
    coin_phis: tuple[float, float] = (math.pi / 2, math.pi / 2),
) -> tuple[ConfusionCurve, float]:
    """
    Confusion curve over ``params`` and the critical value from ``rule``
    (by default the crossing rule for the linear classifier and the
    first-below rule for the network).
    """
    curve = scan_curve(classifier, model_kind, params, n_t, seed, theta0, n_max, n_realizations, coin_phis)
    rule = rule or default_rule(classifier)
    return curve, rule(curve.param_values, curve.p_delocalized)


def sample_size_study(
    model_kind: str,
    sizes: Sequence[int],
    repetitions: int,
    seed: int,
    theta0: float = math.pi / 6,
    n_t: int = 100,
    classifier: str = "svm",
    n_points: int = 50,
    band_width: float | None = None,
    train_kwargs: dict | None = None,
) -> list[tuple[int, int, float | None]]:
    """
    Critical estimates from independently trained classifiers per training-set
    size. Rows are (size, repetition, estimate or None when no transition).

    Every classifier scores the same scan realization (stream ``seed``), so
    the spread at one size reflects training variation only.
    """
    sizes = [int(s) for s in sizes]
    if sizes != sorted(sizes):
        raise ValueError("sizes must be ascending")
    train = train_svm if classifier == "svm" else train_mlp
    grid = param_grid(default_param_max(model_kind, theta0), n_points)
    rows = []
    for size in sizes:
        for r in range(repetitions):
            data_seed = derive_seed(seed, size, r)
            samples = generate_training_set(
                model_kind, theta0, n_t, size, band_width=band_width, seed=data_seed
            )
            model, _ = train(samples, seed=data_seed, **(train_kwargs or {}))
            try:
                _, crit = confusion_scan(model, model_kind, grid, n_t, seed, theta0)
            except NoTransitionError:
                crit = None
            rows.append((size, r, crit))
    return rows
