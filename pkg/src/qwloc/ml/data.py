"""Labelled training data built from final probability distributions."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from ..core import WalkConfig
from ..detect import default_param_max, param_grid
from ..randomness import derive_seed, final_amplitudes, make_model, make_rng

__all__ = [
    "InvalidBandError",
    "DegenerateSampleError",
    "Sample",
    "TrainingBands",
    "default_band_width",
    "training_bands",
    "simulate_distributions",
    "generate_training_set",
    "max_normalize",
    "region_split",
    "region_indices",
    "stack",
    "fingerprint",
]

# fixed batch composition keeps every row's arithmetic independent of scheduling
SIM_BATCH = 256


class InvalidBandError(ValueError):
    pass


class DegenerateSampleError(ValueError):
    pass


@dataclass(frozen=True)
class Sample:
    """One final distribution with its class label (0 delocalized, 1 localized)."""

    features: NDArray[np.float64]
    label: int
    param_value: float
    seed: int
    normalization: str = "sum"


@dataclass(frozen=True)
class TrainingBands:
    deloc: tuple[float, float]
    loc: tuple[float, float]


def default_band_width(model_kind: str) -> float:
    return 0.1 if model_kind == "random_translation" else 0.02


def training_bands(
    model_kind: str,
    theta0: float,
    band_width: float | None = None,
    param_lo: float | None = None,
    param_hi: float | None = None,
) -> TrainingBands:
    """
    Deep-regime bands: the delocalized one starts at the smallest nonzero grid
    magnitude, the localized one ends at the top of the scan range.
    """
    bw = default_band_width(model_kind) if band_width is None else band_width
    hi = default_param_max(model_kind, theta0) if param_hi is None else param_hi
    lo = param_grid(hi)[0] if param_lo is None else param_lo
    if not bw > 0 or lo + bw > hi - bw:
        raise InvalidBandError(f"training bands [{lo}, {lo + bw}] and [{hi - bw}, {hi}] overlap")
    return TrainingBands((lo, lo + bw), (hi - bw, hi))


def simulate_distributions(
    config: WalkConfig, model_kind: str, params: Sequence[float], seeds: Sequence[int]
) -> NDArray[np.float64]:
    """Final P(x) for each (param, seed) pair, computed in fixed-size batches."""
    params = list(params)
    seeds = list(seeds)
    rows = []
    for start in range(0, len(params), SIM_BATCH):
        stop = start + SIM_BATCH
        models = [make_model(model_kind, p) for p in params[start:stop]]
        plus, minus = final_amplitudes(config, models, seeds[start:stop])
        rows.append(plus.real**2 + plus.imag**2 + minus.real**2 + minus.imag**2)
    if not rows:
        return np.empty((0, 2 * config.n_max + 1))
    return np.concatenate(rows)


def generate_training_set(
    model_kind: str,
    theta0: float,
    n_t: int,
    n_samples: int = 1800,
    band_width: float | None = None,
    seed: int = 0,
    n_max: int | None = None,
    param_lo: float | None = None,
    param_hi: float | None = None,
    coin_phis: tuple[float, float] = (math.pi / 2, math.pi / 2),
) -> list[Sample]:
    """
    Half delocalized, half localized samples, each with its own magnitude
    (uniform in its band) and its own random stream.
    """
    if n_samples < 2 or n_samples % 2:
        raise ValueError(f"n_samples must be even and >= 2, got {n_samples}")
    bands = training_bands(model_kind, theta0, band_width, param_lo, param_hi)
    half = n_samples // 2
    rng = make_rng(derive_seed(seed, 0))
    lo0, hi0 = bands.deloc
    lo1, hi1 = bands.loc
    params = np.concatenate([
        lo0 + (hi0 - lo0) * rng.random(half),
        hi1 - (hi1 - lo1) * rng.random(half),
    ])
    labels = [0] * half + [1] * half
    seeds = [derive_seed(seed, 1, i) for i in range(n_samples)]
    config = WalkConfig(n_max or n_t, n_t, theta0, coin_phis, 0)
    features = simulate_distributions(config, model_kind, params, seeds)
    return [
        Sample(features[i], labels[i], float(params[i]), seeds[i])
        for i in range(n_samples)
    ]


def max_normalize(sample: Sample) -> Sample:
    peak = float(np.max(sample.features)) if sample.features.size else 0.0
    if not peak > 0:
        raise DegenerateSampleError("cannot max-normalize an all-zero sample")
    if sample.normalization == "max" and peak == 1.0:
        return sample
    return replace(sample, features=sample.features / peak, normalization="max")


def region_indices(n_max: int, region: int) -> NDArray[np.int64]:
    """
    Site indices of region 1 (-N < x < -N/2), 2 (-N/2 < x < N/2) or 3 (N/2 < x < N).
    """
    x = np.arange(-n_max, n_max + 1)
    half = n_max / 2.0
    if region == 1:
        mask = (x > -n_max) & (x < -half)
    elif region == 2:
        mask = (x > -half) & (x < half)
    elif region == 3:
        mask = (x > half) & (x < n_max)
    else:
        raise ValueError(f"region must be 1, 2 or 3, got {region!r}")
    return np.nonzero(mask)[0]


def region_split(sample: Sample, region: int) -> Sample:
    n = len(sample.features)
    if n % 2 == 0:
        raise ValueError("feature vector must have odd length 2N+1")
    idx = region_indices((n - 1) // 2, region)
    return replace(sample, features=sample.features[idx])


def stack(samples: Sequence[Sample]) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    if not samples:
        raise ValueError("no samples")
    X = np.vstack([s.features for s in samples])
    y = np.array([s.label for s in samples], dtype=np.int64)
    return X, y


def fingerprint(X: NDArray[np.float64], y: NDArray[np.int64]) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X, dtype=np.float64).tobytes())
    h.update(np.ascontiguousarray(y, dtype=np.int64).tobytes())
    return h.hexdigest()
