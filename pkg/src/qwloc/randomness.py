"""
Classical randomness layered on the walk, and the propagation kernel.

Three disorder models pick, at every time step, either the coin angle or the
translation direction from a classical distribution. Disorder is uniform in
space: one draw per step applies to the whole lattice.

Random streams use NumPy's Philox4x64-10 counter-based generator keyed by a
64-bit seed, so a realization is a pure function of (config, model, seed) on
any platform and under any work split. Realization ``k`` of an ensemble uses
seed ``seed + k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np
from numpy.typing import NDArray

from .core import (
    BoundaryOverflowError,
    Direction,
    InvalidParameterError,
    WalkConfig,
    WalkerState,
    coin_entries,
)

__all__ = [
    "NoRandomness",
    "DiscreteAngle",
    "ContinuousAngle",
    "RandomTranslation",
    "RandomnessModel",
    "MODEL_KINDS",
    "make_model",
    "StepChoice",
    "EvolutionRecord",
    "make_rng",
    "derive_seed",
    "draw_choice",
    "draw_schedule",
    "propagate",
    "final_amplitudes",
    "evolve",
    "ensemble_mean",
]

U64 = 2**64


@dataclass(frozen=True)
class NoRandomness:
    kind = "none"

    @property
    def magnitude(self) -> float:
        return 0.0


@dataclass(frozen=True)
class DiscreteAngle:
    """Fair classical coin between theta0 + delta_theta and theta0 - delta_theta."""

    delta_theta: float
    kind = "discrete_angle"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta_theta) and self.delta_theta >= 0):
            raise InvalidParameterError(f"delta_theta must be finite and >= 0, got {self.delta_theta!r}")

    @property
    def magnitude(self) -> float:
        return self.delta_theta


@dataclass(frozen=True)
class ContinuousAngle:
    """theta = theta0 + u with u uniform on [0, delta_theta_max)."""

    delta_theta_max: float
    kind = "continuous_angle"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta_theta_max) and self.delta_theta_max >= 0):
            raise InvalidParameterError(
                f"delta_theta_max must be finite and >= 0, got {self.delta_theta_max!r}"
            )

    @property
    def magnitude(self) -> float:
        return self.delta_theta_max


@dataclass(frozen=True)
class RandomTranslation:
    """Inverse translation with probability p_r, forward otherwise."""

    p_r: float
    kind = "random_translation"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.p_r) and 0.0 <= self.p_r <= 0.5):
            raise InvalidParameterError(f"p_r must lie in [0, 0.5], got {self.p_r!r}")

    @property
    def magnitude(self) -> float:
        return self.p_r


RandomnessModel = Union[NoRandomness, DiscreteAngle, ContinuousAngle, RandomTranslation]

MODEL_KINDS = {
    "none": NoRandomness,
    "discrete_angle": DiscreteAngle,
    "continuous_angle": ContinuousAngle,
    "random_translation": RandomTranslation,
}


def make_model(kind: str, magnitude: float = 0.0) -> RandomnessModel:
    """Build a model from its kind name and magnitude (delta_theta, delta_theta_max or p_r)."""
    try:
        cls = MODEL_KINDS[kind]
    except KeyError:
        raise InvalidParameterError(f"unknown randomness kind {kind!r}; choose from {sorted(MODEL_KINDS)}") from None
    if cls is NoRandomness:
        return NoRandomness()
    return cls(float(magnitude))


def _check_model(model: RandomnessModel, theta0: float) -> None:
    if isinstance(model, DiscreteAngle) and model.delta_theta > theta0:
        raise InvalidParameterError(
            f"delta_theta={model.delta_theta} exceeds theta0={theta0}; scan range is 0 <= delta_theta <= theta0"
        )


@dataclass(frozen=True)
class StepChoice:
    theta_used: float
    direction_used: Direction = Direction.FORWARD


@dataclass
class EvolutionRecord:
    """
    One realization (or an ensemble mean) of a walk.

    ``distributions[t]`` is P(x, t) for t = 0..n_t (row 0 is the initial
    state). ``moi`` and ``ipr`` hold the post-step diagnostics for t = 1..n_t.
    Ensembles of more than one realization carry no choices and no final state.
    """

    config: WalkConfig
    model: RandomnessModel
    choices: list[StepChoice]
    distributions: NDArray[np.float64]
    moi: NDArray[np.float64]
    ipr: NDArray[np.float64]
    final_state: WalkerState | None
    n_realizations: int = 1

    @property
    def final_distribution(self) -> NDArray[np.float64]:
        return self.distributions[-1]


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) % U64))


def derive_seed(seed: int, *keys: int) -> int:
    """Derive an independent 64-bit seed from a base seed and integer keys."""
    ss = np.random.SeedSequence([int(seed) % U64, *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def draw_choice(model: RandomnessModel, theta0: float, rng: np.random.Generator) -> StepChoice:
    """
    Draw the classical choice for one step.

    Every model consumes exactly one uniform variate per step so that the
    stream position depends only on the step index.
    """
    u = float(rng.random())
    if isinstance(model, DiscreteAngle):
        sign = 1.0 if u < 0.5 else -1.0
        return StepChoice(theta0 + sign * model.delta_theta)
    if isinstance(model, ContinuousAngle):
        return StepChoice(theta0 + model.delta_theta_max * u)
    if isinstance(model, RandomTranslation):
        return StepChoice(theta0, Direction.INVERSE if u < model.p_r else Direction.FORWARD)
    return StepChoice(theta0)


def draw_schedule(
    model: RandomnessModel, theta0: float, n_t: int, rng: np.random.Generator
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Vectorized equivalent of ``n_t`` consecutive draw_choice calls: (thetas, forward flags)."""
    u = rng.random(n_t)
    thetas = np.full(n_t, theta0, dtype=np.float64)
    forward = np.ones(n_t, dtype=bool)
    if isinstance(model, DiscreteAngle):
        thetas = theta0 + np.where(u < 0.5, model.delta_theta, -model.delta_theta)
    elif isinstance(model, ContinuousAngle):
        thetas = theta0 + model.delta_theta_max * u
    elif isinstance(model, RandomTranslation):
        forward = ~(u < model.p_r)
    return thetas, forward


def _coin_table(thetas: NDArray[np.float64], phis: tuple[float, float]) -> NDArray[np.complex128]:
    # Scalar libm per distinct angle keeps entries identical to core.coin_matrix.
    uniq, inverse = np.unique(thetas, return_inverse=True)
    table = np.array([coin_entries(float(t), *phis) for t in uniq], dtype=np.complex128)
    return table[inverse.reshape(thetas.shape)]


_MOI_CACHE: dict[int, NDArray[np.float64]] = {}


def moi_weights(n_max: int) -> NDArray[np.float64]:
    """Weights (N - x)^2 on x > 0 and 0 elsewhere, indexed by site."""
    w = _MOI_CACHE.get(n_max)
    if w is None:
        x = np.arange(-n_max, n_max + 1)
        w = np.where(x > 0, (n_max - x).astype(np.float64) ** 2, 0.0)
        _MOI_CACHE[n_max] = w
    return w


def _ipr_rows(plus: NDArray[np.complex128]) -> NDArray[np.float64]:
    a = plus.real**2 + plus.imag**2
    s2 = np.sum(a * a, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sum(a, axis=-1) ** 2 / s2


def propagate(
    thetas: NDArray[np.float64],
    forward: NDArray[np.bool_],
    n_max: int,
    phis: tuple[float, float],
    record: str = "final",
) -> dict[str, NDArray]:
    """
    Evolve R independent walkers from the initial state.

    Parameters
    ----------
    thetas, forward : arrays of shape (R, T)
        Per-realization coin angles and translation directions for each step.
    n_max : int
        Lattice half-width N.
    record : {"final", "diagnostics", "distributions"}
        "final" returns only the final amplitudes, "diagnostics" adds MoI and
        IPR after every step, "distributions" additionally keeps P(x, t).

    Returns
    -------
    dict with "plus", "minus" (R, 2N+1) and, depending on ``record``, "moi",
    "ipr" (R, T) and "distributions" (R, T+1, 2N+1).
    """
    thetas = np.atleast_2d(thetas)
    forward = np.atleast_2d(forward)
    n_rows, n_steps = thetas.shape
    size = 2 * n_max + 1
    coins = _coin_table(thetas, phis)
    plus = np.zeros((n_rows, size), dtype=np.complex128)
    minus = np.zeros_like(plus)
    amp = 1.0 / math.sqrt(2.0)
    plus[:, n_max] = amp
    minus[:, n_max] = amp

    out: dict[str, NDArray] = {}
    if record in ("diagnostics", "distributions"):
        moi = np.empty((n_rows, n_steps))
        ipr = np.empty((n_rows, n_steps))
        weights = moi_weights(n_max)
    if record == "distributions":
        dists = np.zeros((n_rows, n_steps + 1, size))
        dists[:, 0, n_max] = 1.0

    for t in range(n_steps):
        # support after t steps is [-t, t]; work on a window one site wider
        lo = max(0, n_max - t - 1)
        hi = min(size, n_max + t + 2)
        c = coins[:, t]
        p = plus[:, lo:hi]
        m = minus[:, lo:hi]
        pc = c[:, 0:1] * p + c[:, 1:2] * m
        mc = c[:, 2:3] * p + c[:, 3:4] * m
        fwd = forward[:, t]
        all_fwd = bool(fwd.all())
        if lo == 0 or hi == size:
            _check_edges(pc, mc, fwd, lo == 0, hi == size, n_max)
        new_p = np.zeros_like(pc)
        new_m = np.zeros_like(mc)
        if all_fwd:
            new_p[:, 1:] = pc[:, :-1]
            new_m[:, :-1] = mc[:, 1:]
        else:
            pf = np.zeros_like(pc)
            pf[:, 1:] = pc[:, :-1]
            pb = np.zeros_like(pc)
            pb[:, :-1] = pc[:, 1:]
            mf = np.zeros_like(mc)
            mf[:, :-1] = mc[:, 1:]
            mb = np.zeros_like(mc)
            mb[:, 1:] = mc[:, :-1]
            sel = fwd[:, None]
            new_p = np.where(sel, pf, pb)
            new_m = np.where(sel, mf, mb)
        plus[:, lo:hi] = new_p
        minus[:, lo:hi] = new_m
        if record != "final":
            prob = plus.real**2 + plus.imag**2 + minus.real**2 + minus.imag**2
            moi[:, t] = np.sum(prob * weights, axis=1)
            ipr[:, t] = _ipr_rows(plus)
            if record == "distributions":
                dists[:, t + 1] = prob

    out["plus"] = plus
    out["minus"] = minus
    if record != "final":
        out["moi"] = moi
        out["ipr"] = ipr
    if record == "distributions":
        out["distributions"] = dists
    return out


def _check_edges(pc, mc, fwd, at_left: bool, at_right: bool, n_max: int) -> None:
    # forward pushes |+> off the right edge and |-> off the left edge
    bad = np.zeros(fwd.shape, dtype=bool)
    if at_right:
        bad |= fwd & (pc[:, -1] != 0)
        bad |= ~fwd & (mc[:, -1] != 0)
    if at_left:
        bad |= fwd & (mc[:, 0] != 0)
        bad |= ~fwd & (pc[:, 0] != 0)
    if bad.any():
        raise BoundaryOverflowError(
            f"walker reached the lattice edge (n_max={n_max}); n_t must not exceed n_max"
        )


def _schedules(config: WalkConfig, models: Sequence[RandomnessModel], seeds: Sequence[int], n_t: int):
    thetas = np.empty((len(models), n_t))
    forward = np.empty((len(models), n_t), dtype=bool)
    for i, (model, seed) in enumerate(zip(models, seeds)):
        _check_model(model, config.theta0)
        thetas[i], forward[i] = draw_schedule(model, config.theta0, n_t, make_rng(seed))
    return thetas, forward


def final_amplitudes(
    config: WalkConfig,
    models: Sequence[RandomnessModel],
    seeds: Iterable[int],
) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
    """Final (plus, minus) amplitudes, one row per (model, seed) pair, as one batch."""
    seeds = list(seeds)
    if len(seeds) != len(models):
        raise ValueError("models and seeds must align")
    thetas, forward = _schedules(config, models, seeds, config.n_t)
    res = propagate(thetas, forward, config.n_max, config.coin_phis)
    return res["plus"], res["minus"]


def evolve(config: WalkConfig, model: RandomnessModel) -> EvolutionRecord:
    """Single realization with seed ``config.seed``; records P(x, t), MoI(t), IPR(t)."""
    _check_model(model, config.theta0)
    rng = make_rng(config.seed)
    thetas, forward = draw_schedule(model, config.theta0, config.n_t, rng)
    res = propagate(thetas[None], forward[None], config.n_max, config.coin_phis, record="distributions")
    choices = [
        StepChoice(float(th), Direction.FORWARD if f else Direction.INVERSE)
        for th, f in zip(thetas, forward)
    ]
    state = WalkerState(res["plus"][0], res["minus"][0], config.n_max)
    return EvolutionRecord(
        config=config,
        model=model,
        choices=choices,
        distributions=res["distributions"][0],
        moi=res["moi"][0],
        ipr=res["ipr"][0],
        final_state=state,
    )


def ensemble_mean(
    config: WalkConfig, model: RandomnessModel, n_realizations: int, batch_size: int = 64
) -> EvolutionRecord:
    """
    Average P(x, t), MoI(t) and IPR(t) over seeds seed, seed+1, ...

    Realizations are propagated in fixed consecutive batches and summed in
    index order, so the result does not depend on how work is scheduled.
    """
    if n_realizations < 1:
        raise ValueError(f"n_realizations must be >= 1, got {n_realizations}")
    if n_realizations == 1:
        return evolve(config, model)
    size = 2 * config.n_max + 1
    dist_sum = np.zeros((config.n_t + 1, size))
    moi_sum = np.zeros(config.n_t)
    ipr_sum = np.zeros(config.n_t)
    for start in range(0, n_realizations, batch_size):
        stop = min(start + batch_size, n_realizations)
        seeds = [(config.seed + k) % U64 for k in range(start, stop)]
        thetas, forward = _schedules(config, [model] * len(seeds), seeds, config.n_t)
        res = propagate(thetas, forward, config.n_max, config.coin_phis, record="distributions")
        for r in range(stop - start):
            dist_sum += res["distributions"][r]
            moi_sum += res["moi"][r]
            ipr_sum += res["ipr"][r]
    return EvolutionRecord(
        config=config,
        model=model,
        choices=[],
        distributions=dist_sum / n_realizations,
        moi=moi_sum / n_realizations,
        ipr=ipr_sum / n_realizations,
        final_state=None,
        n_realizations=n_realizations,
    )
