"""
Critical-point detectors and power-law scaling of the critical randomness.

Manual detectors work on a :class:`SweepGrid` (final distributions for a
range of randomness magnitudes at fixed run length):

* ``human_method``  - peak-structure labels, centre of the critical band
* ``moi_kink``      - breakpoint of a two-segment log-log fit of MoI
* ``ipr_max``       - position of the IPR maximum

``scaling_sweep`` runs the detectors (and optionally the classifiers) for
several run lengths and fits critical value ~ prefactor * n^(-exponent).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from .core import WalkConfig
from .observables import PeakConfig, PeakLabel, classify_peaks
from .randomness import (
    MODEL_KINDS,
    final_amplitudes,
    make_model,
    moi_weights,
)

log = logging.getLogger(__name__)

__all__ = [
    "DetectionError",
    "InsufficientDataError",
    "NoKinkError",
    "BoundaryMaximumError",
    "RegimeCoverageError",
    "DomainError",
    "SweepGrid",
    "CriticalEstimate",
    "PowerLawFit",
    "MANUAL_METHODS",
    "ML_METHODS",
    "ALL_METHODS",
    "default_param_max",
    "param_grid",
    "refine_grid",
    "run_sweep",
    "moi_kink",
    "ipr_max",
    "human_from_labels",
    "human_method",
    "power_law_fit",
    "detect_manual",
    "ScalingTask",
    "ScalingResult",
    "run_scaling_task",
    "scaling_tasks",
    "scaling_sweep",
]

MANUAL_METHODS = ("Human", "MoI", "IPR")
ML_METHODS = ("SVM", "MLP")
ALL_METHODS = MANUAL_METHODS + ML_METHODS


class DetectionError(RuntimeError):
    """A detector could not produce an estimate from the data it was given."""


class InsufficientDataError(DetectionError):
    pass


class NoKinkError(DetectionError):
    pass


class BoundaryMaximumError(DetectionError):
    pass


class RegimeCoverageError(DetectionError):
    pass


class DomainError(DetectionError, ValueError):
    pass


# ---------------------------------------------------------------------------
# sweeps


def default_param_max(model_kind: str, theta0: float) -> float:
    """Upper end of the scanned magnitude for each disorder model."""
    if model_kind == "discrete_angle":
        return theta0
    if model_kind == "continuous_angle":
        return 2.0 * theta0
    if model_kind == "random_translation":
        return 0.5
    return 0.0


def param_grid(
    param_max: float,
    n_points: int = 50,
    spacing: str = "log",
    param_min: float | None = None,
) -> NDArray[np.float64]:
    """
    Ascending scan grid ending at ``param_max``.

    Log spacing (default) starts at ``param_max / 100``; linear spacing
    starts at the first nonzero step of an evenly spaced grid from 0.
    """
    if n_points < 1 or not param_max > 0:
        raise ValueError("need n_points >= 1 and param_max > 0")
    if n_points == 1:
        return np.array([float(param_max)])
    if spacing == "log":
        lo = param_max / 100.0 if param_min is None else param_min
        grid = np.geomspace(lo, param_max, n_points)
    elif spacing == "linear":
        lo = param_max / n_points if param_min is None else param_min
        grid = np.linspace(lo, param_max, n_points)
    else:
        raise ValueError(f"unknown spacing {spacing!r}")
    grid[-1] = param_max
    return grid


def refine_grid(grid: NDArray[np.float64], estimate: float, factor: int = 5) -> NDArray[np.float64]:
    """
    Extra points at ``factor`` times the local resolution over the two coarse
    cells around ``estimate`` (geometric subdivision when the grid is positive).
    """
    grid = np.asarray(grid, dtype=float)
    i = int(np.clip(np.searchsorted(grid, estimate), 1, len(grid) - 1))
    lo_i, hi_i = max(i - 1, 0), min(i + 1, len(grid) - 1)
    new = []
    for a, b in zip(grid[lo_i:hi_i], grid[lo_i + 1 : hi_i + 1]):
        if a > 0:
            pts = np.geomspace(a, b, factor + 1)[1:-1]
        else:
            pts = np.linspace(a, b, factor + 1)[1:-1]
        new.append(pts)
    return np.concatenate(new) if new else np.empty(0)


@dataclass
class SweepGrid:
    """
    Final-time observables of one disorder realization swept over magnitudes.

    Every magnitude is driven by the same random stream (``seed``), so the
    classical coin flips are common to all grid points.
    """

    n_max: int
    n_t: int
    model_kind: str
    theta0: float
    seed: int
    param_values: NDArray[np.float64]
    final_distributions: NDArray[np.float64]
    moi: NDArray[np.float64]
    ipr: NDArray[np.float64]
    coin_phis: tuple[float, float] = (math.pi / 2, math.pi / 2)

    def __post_init__(self) -> None:
        if np.any(np.diff(self.param_values) <= 0):
            raise ValueError("param_values must be strictly ascending")
        if not (len(self.param_values) == len(self.final_distributions) == len(self.moi) == len(self.ipr)):
            raise ValueError("records must align one-to-one with param_values")

    def labels(self, peak_config: PeakConfig = PeakConfig()) -> list[PeakLabel]:
        return [classify_peaks(p, self.n_t, peak_config).label for p in self.final_distributions]

    def config(self) -> WalkConfig:
        return WalkConfig(self.n_max, self.n_t, self.theta0, self.coin_phis, self.seed)

    def extended(self, new_params: Iterable[float]) -> "SweepGrid":
        """Grid with additional magnitudes simulated from the same stream."""
        new = np.setdiff1d(np.asarray(list(new_params), dtype=float), self.param_values)
        if new.size == 0:
            return self
        extra = run_sweep(self.config(), self.model_kind, new)
        params = np.concatenate([self.param_values, extra.param_values])
        order = np.argsort(params, kind="stable")
        return SweepGrid(
            self.n_max,
            self.n_t,
            self.model_kind,
            self.theta0,
            self.seed,
            params[order],
            np.concatenate([self.final_distributions, extra.final_distributions])[order],
            np.concatenate([self.moi, extra.moi])[order],
            np.concatenate([self.ipr, extra.ipr])[order],
            self.coin_phis,
        )


def run_sweep(config: WalkConfig, model_kind: str, params: Sequence[float]) -> SweepGrid:
    """Simulate one realization (seed ``config.seed``) at every magnitude in ``params``."""
    if model_kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {model_kind!r}")
    params = np.asarray(params, dtype=float)
    models = [make_model(model_kind, p) for p in params]
    plus, minus = final_amplitudes(config, models, [config.seed] * len(models))
    prob = plus.real**2 + plus.imag**2 + minus.real**2 + minus.imag**2
    a = plus.real**2 + plus.imag**2
    with np.errstate(divide="ignore", invalid="ignore"):
        iprs = np.sum(a, axis=1) ** 2 / np.sum(a * a, axis=1)
    return SweepGrid(
        config.n_max,
        config.n_t,
        model_kind,
        config.theta0,
        config.seed,
        params,
        prob,
        np.sum(prob * moi_weights(config.n_max), axis=1),
        iprs,
        tuple(config.coin_phis),
    )


# ---------------------------------------------------------------------------
# detectors


def _hinge_residual(u: NDArray, v: NDArray, k: int) -> float:
    design = np.column_stack([np.ones_like(u), u, np.maximum(0.0, u - u[k])])
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    r = design @ coef - v
    return float(r @ r)


def moi_kink(
    x: Sequence[float],
    y: Sequence[float],
    min_segment: int = 3,
    min_improvement: float = 0.05,
) -> float:
    """
    Breakpoint of the best continuous two-segment line through (log x, log y).

    Every interior abscissa with at least ``min_segment`` points on each side
    (breakpoint included) is tried; the smallest total squared residual wins,
    ties going to the smaller abscissa. Raises NoKinkError unless the best
    split lowers the single-line residual by at least ``min_improvement``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 8:
        raise InsufficientDataError(f"moi_kink needs at least 8 points, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("moi_kink works in log-log coordinates; all values must be positive")
    order = np.argsort(x, kind="stable")
    u, v = np.log(x[order]), np.log(y[order])

    line = np.column_stack([np.ones_like(u), u])
    coef, *_ = np.linalg.lstsq(line, v, rcond=None)
    r = line @ coef - v
    single = float(r @ r)
    dv = v - v.mean()
    # a straight line to rounding error has no kink to find
    if single <= 1e-20 * max(float(dv @ dv), 1e-300):
        raise NoKinkError("data lie on a single power law")

    # residuals closer than this count as ties
    tol = 1e-12 * max(single, 1e-300)
    best_k, best = -1, math.inf
    for k in range(min_segment - 1, len(u) - min_segment + 1):
        res = _hinge_residual(u, v, k)
        if best_k < 0 or res < best - tol:
            best_k, best = k, res
    if best_k < 0 or not single > 0 or single - best < min_improvement * single:
        raise NoKinkError("no breakpoint improves on a single power law")
    return float(x[order][best_k])


def ipr_max(x: Sequence[float], y: Sequence[float], refine: bool = False) -> float:
    """
    Magnitude at the IPR maximum.

    Plateaus of equal maximal values report their midpoint. With ``refine``
    a parabola through the three points around the maximum sets the estimate,
    clipped to the neighbouring grid points.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise InsufficientDataError(f"ipr_max needs at least 3 points, got {len(x)}")
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]
    finite = np.where(np.isfinite(y), y, -np.inf)
    top = finite.max()
    i = int(np.argmax(finite))
    j = i
    while j + 1 < len(y) and finite[j + 1] == top:
        j += 1
    if i == 0 or j == len(y) - 1:
        raise BoundaryMaximumError("IPR maximum lies on the edge of the scanned range")
    if j > i:
        return float(0.5 * (x[i] + x[j]))
    if not refine:
        return float(x[i])
    x0, x1, x2 = x[i - 1 : i + 2]
    y0, y1, y2 = finite[i - 1 : i + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    if a >= 0:
        return float(x1)
    return float(np.clip(-b / (2 * a), x0, x2))


_LABEL_RANK = {PeakLabel.TWO_PEAK: 0, PeakLabel.FLAT_OR_THREE_PEAK: 1, PeakLabel.SINGLE_PEAK: 2}


def human_from_labels(params: Sequence[float], labels: Sequence[PeakLabel | str]) -> float:
    """
    Centre of the critical band from an ordered sequence of peak labels.

    Labels are fitted with the monotone step pattern TwoPeak... FlatOrThreePeak...
    SinglePeak that disagrees with the fewest labels (at least one TwoPeak
    first and one SinglePeak last; ties prefer the narrowest band, then the
    earliest). The result is the midpoint of the fitted critical band or, if
    the band is empty, the midpoint between the last TwoPeak and the first
    SinglePeak.
    """
    params = np.asarray(params, dtype=float)
    ranks = np.array([_LABEL_RANK[PeakLabel(l)] for l in labels])
    n = len(ranks)
    if n != len(params):
        raise ValueError("params and labels must align")
    if n < 2 or not np.any(ranks == 0) or not np.any(ranks == 2):
        raise RegimeCoverageError("the scan must contain both delocalized (TwoPeak) and localized (SinglePeak) points")

    # cost of labelling [0, a) Two, [a, b) Flat, [b, n) Single
    not_two = np.concatenate([[0], np.cumsum(ranks != 0)])
    not_flat = np.concatenate([[0], np.cumsum(ranks != 1)])
    not_single = np.concatenate([[0], np.cumsum(ranks != 2)])
    best = None
    for a in range(1, n):
        for b in range(a, n):
            cost = not_two[a] + (not_flat[b] - not_flat[a]) + (not_single[n] - not_single[b])
            key = (int(cost), b - a, a)
            if best is None or key < best[0]:
                best = (key, a, b)
    _, a, b = best
    if b > a:
        return float(0.5 * (params[a] + params[b - 1]))
    return float(0.5 * (params[a - 1] + params[a]))


def human_method(grid: SweepGrid, peak_config: PeakConfig = PeakConfig()) -> float:
    return human_from_labels(grid.param_values, grid.labels(peak_config))


@dataclass(frozen=True)
class PowerLawFit:
    """critical value = prefactor * n^(-exponent)."""

    exponent: float
    prefactor: float
    r_squared: float


def power_law_fit(n: Sequence[float], values: Sequence[float]) -> PowerLawFit:
    n = np.asarray(n, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(n) != len(values):
        raise ValueError("n and values must align")
    if len(n) < 3:
        raise InsufficientDataError(f"power_law_fit needs at least 3 points, got {len(n)}")
    if np.any(n <= 0) or np.any(values <= 0):
        raise DomainError("power_law_fit needs strictly positive sizes and critical values")
    u, v = np.log(n), np.log(values)
    du, dv = u - u.mean(), v - v.mean()
    suu = float(du @ du)
    if suu == 0:
        raise DomainError("power_law_fit needs at least two distinct sizes")
    slope = float(du @ dv) / suu
    intercept = float(v.mean() - slope * u.mean())
    resid = dv - slope * du
    ss_tot = float(dv @ dv)
    ss_res = float(resid @ resid)
    r2 = 1.0 if ss_tot <= 1e-30 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return PowerLawFit(exponent=-slope, prefactor=math.exp(intercept), r_squared=r2)


# ---------------------------------------------------------------------------
# manual detection on one realization, with one refinement pass


@dataclass
class CriticalEstimate:
    method: str
    n: int
    critical_value: float | None
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.critical_value is not None


MANUAL_DETECTORS: dict[str, Callable[[SweepGrid, PeakConfig], float]] = {
    "Human": lambda g, pc: human_method(g, pc),
    "MoI": lambda g, pc: moi_kink(g.param_values[g.param_values > 0], g.moi[g.param_values > 0]),
    "IPR": lambda g, pc: ipr_max(g.param_values, g.ipr),
}


def detect_manual(
    grid: SweepGrid,
    methods: Iterable[str] = MANUAL_METHODS,
    refine_factor: int = 5,
    peak_config: PeakConfig = PeakConfig(),
) -> dict[str, float | DetectionError]:
    """
    Run each manual detector on the coarse grid, refine the grid around its
    estimate and run it again. Failures are returned as exception objects.
    """
    out: dict[str, float | DetectionError] = {}
    for method in methods:
        detector = MANUAL_DETECTORS[method]
        try:
            coarse = detector(grid, peak_config)
            if refine_factor and refine_factor > 1:
                fine = grid.extended(refine_grid(grid.param_values, coarse, refine_factor))
                out[method] = detector(fine, peak_config)
            else:
                out[method] = coarse
        except DetectionError as exc:
            out[method] = exc
    return out


# ---------------------------------------------------------------------------
# scaling of the critical value with run length


@dataclass(frozen=True)
class ScalingTask:
    """One (run length, replicate) unit of a scaling sweep."""

    n_t: int
    replicate: int
    model_kind: str
    theta0: float
    scan_seed: int
    train_seed: int
    methods: tuple[str, ...]
    n_max: int | None = None
    n_points: int = 50
    spacing: str = "log"
    refine_factor: int = 5
    peak_config: PeakConfig = PeakConfig()
    n_samples: int = 1800
    band_width: float | None = None
    coin_phis: tuple[float, float] = (math.pi / 2, math.pi / 2)
    ml_options: dict = field(default_factory=dict)


@dataclass
class ScalingResult:
    """
    Median critical value per (method, n), the per-replicate values behind
    them, a power-law fit (or the error that prevented it) per method, and
    the methods that failed on more than a quarter of the run lengths.
    """

    estimates: list[CriticalEstimate]
    replicates: list[CriticalEstimate]
    fits: dict[str, PowerLawFit | DetectionError]
    unreliable: list[str]

    @property
    def complete(self) -> bool:
        return not self.unreliable and all(e.ok for e in self.estimates)


def _ml_estimates(task: ScalingTask, grid: SweepGrid, methods: list[str]) -> dict[str, float | DetectionError]:
    from .ml.confusion import confusion_curve, crossing_rule, first_below_rule
    from .ml.data import generate_training_set
    from .ml.mlp import train_mlp
    from .ml.svm import train_svm

    opts = task.ml_options
    samples = generate_training_set(
        task.model_kind, task.theta0, task.n_t, task.n_samples,
        band_width=task.band_width, seed=task.train_seed, n_max=task.n_max,
        coin_phis=task.coin_phis,
    )
    out: dict[str, float | DetectionError] = {}
    for method in methods:
        if method == "SVM":
            model, acc = train_svm(samples, seed=task.train_seed, **opts.get("svm", {}))
            rule = crossing_rule
        else:
            model, acc = train_mlp(samples, seed=task.train_seed, **opts.get("mlp", {}))
            rule = first_below_rule
        try:
            curve = confusion_curve(model, grid.param_values, grid.final_distributions)
            coarse = rule(curve.param_values, curve.p_delocalized)
            value = coarse
            if task.refine_factor and task.refine_factor > 1:
                fine = grid.extended(refine_grid(grid.param_values, coarse, task.refine_factor))
                curve = confusion_curve(model, fine.param_values, fine.final_distributions)
                value = rule(curve.param_values, curve.p_delocalized)
            out[method] = value
        except DetectionError as exc:
            out[method] = exc
        log.debug("%s n_t=%d r=%d holdout=%.3f", method, task.n_t, task.replicate, acc)
    return out


def run_scaling_task(task: ScalingTask) -> dict[str, float | DetectionError]:
    """Detector outputs for one run length and one replicate."""
    if task.model_kind == "none":
        return {m: RegimeCoverageError("no randomness: there is no transition to detect") for m in task.methods}
    n_max = task.n_max or task.n_t
    config = WalkConfig(n_max, task.n_t, task.theta0, task.coin_phis, task.scan_seed)
    params = param_grid(default_param_max(task.model_kind, task.theta0), task.n_points, task.spacing)
    grid = run_sweep(config, task.model_kind, params)
    manual = [m for m in task.methods if m in MANUAL_METHODS]
    ml = [m for m in task.methods if m in ML_METHODS]
    out = detect_manual(grid, manual, task.refine_factor, task.peak_config)
    if ml:
        out.update(_ml_estimates(task, grid, ml))
    log.info("n_t=%d replicate=%d done", task.n_t, task.replicate)
    return out


def scaling_tasks(
    base_config: WalkConfig,
    model_kind: str,
    n_values: Sequence[int],
    methods: Iterable[str] = ALL_METHODS,
    replicates: int = 1,
    **options,
) -> list[ScalingTask]:
    """
    Work units in (n, replicate) order. Replicate r scans with stream
    seed + r; its training data are seeded from (seed, n, r).
    """
    from .randomness import derive_seed

    requested = set(methods)
    unknown = requested - set(ALL_METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    methods = tuple(m for m in ALL_METHODS if m in requested)
    n_max_override = options.pop("n_max", None)
    tasks = []
    for n in n_values:
        for r in range(replicates):
            tasks.append(ScalingTask(
                n_t=int(n),
                replicate=r,
                model_kind=model_kind,
                theta0=base_config.theta0,
                scan_seed=(base_config.seed + r) % 2**64,
                train_seed=derive_seed(base_config.seed, int(n), r),
                methods=methods,
                n_max=n_max_override,
                coin_phis=tuple(base_config.coin_phis),
                **options,
            ))
    return tasks


def scaling_sweep(
    base_config: WalkConfig,
    model_kind: str,
    n_values: Sequence[int],
    methods: Iterable[str] = ALL_METHODS,
    replicates: int = 1,
    threads: int | None = 1,
    unreliable_fraction: float = 0.25,
    **options,
) -> ScalingResult:
    """
    Critical value versus run length for each method, with power-law fits.

    Each run length uses n_max = n_t unless ``n_max`` is given. Fewer than
    three run lengths leave every fit failing with InsufficientDataError. The reported
    value per (method, n) is the median over the successful replicates. A
    method failing on more than ``unreliable_fraction`` of the run lengths is
    listed as unreliable; the other methods are still fitted.
    """
    from .parallel import ordered_map

    n_values = [int(n) for n in n_values]
    if n_values != sorted(n_values) or len(set(n_values)) != len(n_values):
        raise ValueError("n_values must be strictly ascending")
    if not n_values:
        raise ValueError("n_values is empty")
    tasks = scaling_tasks(base_config, model_kind, n_values, methods, replicates, **options)
    outputs = ordered_map(run_scaling_task, tasks, threads)
    method_list = tasks[0].methods if tasks else ()

    per_rep: list[CriticalEstimate] = []
    for task, out in zip(tasks, outputs):
        for m in method_list:
            v = out[m]
            if isinstance(v, Exception):
                per_rep.append(CriticalEstimate(m, task.n_t, None, {"replicate": task.replicate, "error": f"{type(v).__name__}: {v}"}))
            else:
                per_rep.append(CriticalEstimate(m, task.n_t, float(v), {"replicate": task.replicate}))

    estimates: list[CriticalEstimate] = []
    fits: dict[str, PowerLawFit | DetectionError] = {}
    unreliable: list[str] = []
    for m in method_list:
        failures = 0
        ns, vals = [], []
        for n in n_values:
            reps = [e for e in per_rep if e.method == m and e.n == n]
            good = [e.critical_value for e in reps if e.ok]
            if good:
                value = float(np.median(good))
                estimates.append(CriticalEstimate(m, n, value, {"successes": len(good), "replicates": len(reps)}))
                ns.append(n)
                vals.append(value)
            else:
                failures += 1
                errors = sorted({e.diagnostics["error"] for e in reps})
                estimates.append(CriticalEstimate(m, n, None, {"successes": 0, "replicates": len(reps), "error": "; ".join(errors)}))
        if failures > unreliable_fraction * len(n_values):
            unreliable.append(m)
        try:
            fits[m] = power_law_fit(ns, vals)
        except DetectionError as exc:
            fits[m] = exc
    return ScalingResult(estimates, per_rep, fits, unreliable)
