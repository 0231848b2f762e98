"""
Discrete-time quantum walk on a finite 1D lattice.

The walker carries two coin components (|+>, |->) on each of the 2N+1 sites
x = -N..N. One step applies the coin rotation at every site and then the
conditional shift: |+> moves right and |-> moves left (forward), or the
reverse (inverse translation).

All operations are pure: they return new states and never mutate inputs.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "InvalidParameterError",
    "InvalidConfigError",
    "BoundaryOverflowError",
    "Direction",
    "CoinParams",
    "WalkerState",
    "WalkConfig",
    "coin_matrix",
    "coin_entries",
    "initial_state",
    "apply_coin",
    "apply_translation",
    "step",
]

HALF_PI = 0.5 * math.pi


class InvalidParameterError(ValueError):
    """A coin or randomness parameter is not a finite, admissible number."""


class InvalidConfigError(ValueError):
    """A walk configuration violates its invariants."""


class BoundaryOverflowError(RuntimeError):
    """Amplitude would be shifted past the lattice edge (n_t > n_max)."""


class Direction(str, Enum):
    FORWARD = "forward"
    INVERSE = "inverse"


@dataclass(frozen=True)
class CoinParams:
    """Angles of the coin rotation; phi1 = phi2 = pi/2 is the convention used throughout."""

    theta: float
    phi1: float = HALF_PI
    phi2: float = HALF_PI

    def __post_init__(self) -> None:
        for name in ("theta", "phi1", "phi2"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidParameterError(f"coin angle {name} must be finite, got {value!r}")


@dataclass(frozen=True)
class WalkerState:
    """
    Amplitudes of both coin components on the sites -n_max..n_max.

    ``plus_amp[origin_index + x]`` is the |x,+> amplitude.
    """

    plus_amp: NDArray[np.complex128]
    minus_amp: NDArray[np.complex128]
    n_max: int
    origin_index: int = field(init=False)

    def __post_init__(self) -> None:
        size = 2 * self.n_max + 1
        if self.plus_amp.shape != (size,) or self.minus_amp.shape != (size,):
            raise InvalidConfigError(
                f"amplitude arrays must have shape ({size},) for n_max={self.n_max}"
            )
        object.__setattr__(self, "origin_index", self.n_max)

    @property
    def sites(self) -> NDArray[np.int64]:
        return np.arange(-self.n_max, self.n_max + 1)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.plus_amp) ** 2) + np.sum(np.abs(self.minus_amp) ** 2))

    def amplitude(self, x: int) -> tuple[complex, complex]:
        i = self.origin_index + x
        return complex(self.plus_amp[i]), complex(self.minus_amp[i])


@dataclass(frozen=True)
class WalkConfig:
    """
    Lattice size, run length, base coin angle and seed for one walk.

    n_max is the lattice half-width N and n_t the number of steps; the walker
    can never reach the edge as long as n_t <= n_max.
    """

    n_max: int
    n_t: int
    theta0: float = math.pi / 6
    coin_phis: tuple[float, float] = (HALF_PI, HALF_PI)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_max < 1:
            raise InvalidConfigError(f"n_max must be >= 1, got {self.n_max}")
        if not 1 <= self.n_t <= self.n_max:
            raise InvalidConfigError(f"need 1 <= n_t <= n_max, got n_t={self.n_t}, n_max={self.n_max}")
        if not (math.isfinite(self.theta0) and 0.0 < self.theta0 < HALF_PI):
            raise InvalidConfigError(f"theta0 must lie in (0, pi/2), got {self.theta0!r}")
        if not all(math.isfinite(p) for p in self.coin_phis) or len(self.coin_phis) != 2:
            raise InvalidConfigError(f"coin_phis must be two finite angles, got {self.coin_phis!r}")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


def coin_entries(theta: float, phi1: float = HALF_PI, phi2: float = HALF_PI) -> tuple[complex, complex, complex, complex]:
    """Return the four coin entries (a, b, c, d) of [[a, b], [c, d]] as Python complex numbers."""
    if not (math.isfinite(theta) and math.isfinite(phi1) and math.isfinite(phi2)):
        raise InvalidParameterError(f"non-finite coin angle in {(theta, phi1, phi2)!r}")
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    return (
        complex(cos_t, 0.0),
        cmath.exp(1j * phi1) * sin_t,
        cmath.exp(1j * phi2) * sin_t,
        -cmath.exp(1j * (phi1 + phi2)) * cos_t,
    )


def coin_matrix(params: CoinParams) -> NDArray[np.complex128]:
    """
    Return the 2x2 coin rotation.

    [[cos t, e^{i p1} sin t], [e^{i p2} sin t, -e^{i (p1 + p2)} cos t]]
    """
    a, b, c, d = coin_entries(params.theta, params.phi1, params.phi2)
    return np.array([[a, b], [c, d]], dtype=np.complex128)


def initial_state(n_max: int) -> WalkerState:
    """Equal superposition of both coin states at the origin."""
    if n_max < 1:
        raise InvalidConfigError(f"n_max must be >= 1, got {n_max}")
    plus = np.zeros(2 * n_max + 1, dtype=np.complex128)
    minus = np.zeros_like(plus)
    amp = 1.0 / math.sqrt(2.0)
    plus[n_max] = amp
    minus[n_max] = amp
    return WalkerState(plus, minus, n_max)


def apply_coin(state: WalkerState, params: CoinParams) -> WalkerState:
    a, b, c, d = coin_entries(params.theta, params.phi1, params.phi2)
    p, m = state.plus_amp, state.minus_amp
    return WalkerState(a * p + b * m, c * p + d * m, state.n_max)


def _shift(arr: NDArray[np.complex128], offset: int) -> NDArray[np.complex128]:
    out = np.zeros_like(arr)
    if offset > 0:
        out[offset:] = arr[:-offset]
    else:
        out[:offset] = arr[-offset:]
    return out


def apply_translation(state: WalkerState, direction: Direction | str = Direction.FORWARD) -> WalkerState:
    """
    Shift |+> by +1 and |-> by -1 (forward), or the opposite (inverse).

    Raises BoundaryOverflowError if any amplitude sits on the edge it would be
    pushed across; the open-boundary lattice is sized so this never happens for
    a valid configuration.
    """
    direction = Direction(direction)
    p, m = state.plus_amp, state.minus_amp
    step_plus = 1 if direction is Direction.FORWARD else -1
    edge_plus = -1 if step_plus > 0 else 0
    edge_minus = 0 if step_plus > 0 else -1
    if p[edge_plus] != 0 or m[edge_minus] != 0:
        raise BoundaryOverflowError(
            f"amplitude at the lattice edge (n_max={state.n_max}) would leave the lattice"
        )
    return WalkerState(_shift(p, step_plus), _shift(m, -step_plus), state.n_max)


def step(state: WalkerState, params: CoinParams, direction: Direction | str = Direction.FORWARD) -> WalkerState:
    """One walk step: coin first, then translation."""
    return apply_translation(apply_coin(state, params), direction)
