"""
Diagnostics of a walk: probability distribution, moment of inertia (MoI),
inverse participation ratio (IPR) and the peak-structure classifier that
mechanizes reading a final distribution by eye.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray
from scipy.signal import find_peaks, peak_widths

from .core import WalkerState
from .randomness import moi_weights

__all__ = [
    "DegenerateStateError",
    "ProbabilityDistribution",
    "DiagnosticsSeries",
    "PeakLabel",
    "PeakConfig",
    "PeakStructure",
    "probability_distribution",
    "moment_of_inertia",
    "ipr",
    "ipr_from_amplitudes",
    "smooth",
    "classify_peaks",
]


class DegenerateStateError(ValueError):
    """The |+> component carries no weight, so the IPR is undefined."""


@dataclass(frozen=True)
class ProbabilityDistribution:
    """P(x) on sites -N..N at time ``time``."""

    values: NDArray[np.float64]
    time: int

    @property
    def n_max(self) -> int:
        return (len(self.values) - 1) // 2

    @property
    def sites(self) -> NDArray[np.int64]:
        return np.arange(-self.n_max, self.n_max + 1)


@dataclass(frozen=True)
class DiagnosticsSeries:
    moi: NDArray[np.float64]
    ipr: NDArray[np.float64]


class PeakLabel(str, Enum):
    TWO_PEAK = "TwoPeak"
    SINGLE_PEAK = "SinglePeak"
    FLAT_OR_THREE_PEAK = "FlatOrThreePeak"


@dataclass(frozen=True)
class PeakConfig:
    """
    Thresholds of the peak classifier.

    window_fraction
        Moving-average width as a fraction of the run length n_t, rounded to
        an even number of sites (at least ``min_window``). Even widths see the
        same number of occupied sites wherever they sit, because only every
        other site is populated at any given time.
    prominence
        Minimum peak prominence relative to the tallest smoothed value.
    central_fraction
        A peak with |x| <= central_fraction * n_t is central.
    outer_fraction
        A peak with |x| >= outer_fraction * n_t is an outer (front) peak.
    dominance
        For a two-peak call, any third peak must be lower than this fraction
        of the tallest.
    side_fraction
        A central maximum flanked by an outer peak at least this high
        (relative) is a three-peak structure rather than a single peak.
    flat_width
        A central maximum whose full width at half height exceeds
        flat_width * n_t is a flat distribution rather than a single peak.
    tie_digits
        Smoothed values are rounded to this many decimals relative to their
        maximum, so rounding noise cannot split a plateau.
    """

    window_fraction: float = 0.05
    min_window: int = 4
    prominence: float = 0.2
    central_fraction: float = 0.1
    outer_fraction: float = 0.5
    dominance: float = 0.75
    side_fraction: float = 0.25
    flat_width: float = 0.8
    tie_digits: int = 12

    def window(self, n_t: int) -> int:
        w = int(round(self.window_fraction * n_t / 2.0)) * 2
        return max(self.min_window + self.min_window % 2, w)


@dataclass(frozen=True)
class PeakStructure:
    label: PeakLabel
    peak_positions: list[int] = field(default_factory=list)
    peak_heights: list[float] = field(default_factory=list)


def probability_distribution(state: WalkerState, time: int = 0) -> ProbabilityDistribution:
    p, m = state.plus_amp, state.minus_amp
    values = p.real**2 + p.imag**2 + m.real**2 + m.imag**2
    return ProbabilityDistribution(values, time)


def moment_of_inertia(dist: ProbabilityDistribution | NDArray[np.float64], n_max: int | None = None) -> float:
    """
    Sum over x > 0 of P(x) (N - x)^2.

    Sites with x <= 0 are left out; the distribution is mirror symmetric.
    """
    values = dist.values if isinstance(dist, ProbabilityDistribution) else np.asarray(dist, dtype=float)
    lattice_n = (len(values) - 1) // 2
    n_max = lattice_n if n_max is None else n_max
    if n_max == lattice_n:
        return float(values @ moi_weights(n_max))
    x = np.arange(-lattice_n, lattice_n + 1)
    return float(np.sum(np.where(x > 0, values * (n_max - x) ** 2.0, 0.0)))


def ipr_from_amplitudes(amps: NDArray[np.complex128]) -> float:
    a = amps.real**2 + amps.imag**2
    top = float(np.max(a)) if a.size else 0.0
    if top == 0.0:
        raise DegenerateStateError("IPR undefined: amplitude vector is identically zero")
    # the ratio is scale free; dividing by the largest weight avoids underflow
    a = a / top
    return float(np.sum(a)) ** 2 / float(np.sum(a * a))


def ipr(state: WalkerState, use_full_distribution: bool = False) -> float:
    """
    (sum |psi_+|^2)^2 / sum |psi_+|^4, from the |+> component only.

    With ``use_full_distribution`` the same ratio is taken over P(x) instead.
    """
    if use_full_distribution:
        values = probability_distribution(state).values
        s2 = float(np.sum(values**2))
        if s2 == 0.0:
            raise DegenerateStateError("IPR undefined: empty distribution")
        return float(np.sum(values)) ** 2 / s2
    return ipr_from_amplitudes(state.plus_amp)


def smooth(values: NDArray[np.float64], width: int) -> NDArray[np.float64]:
    """Symmetric moving average over ``width`` sites (even width, half-weight end taps)."""
    if width % 2:
        kernel = np.ones(width) / width
    else:
        kernel = np.ones(width + 1)
        kernel[0] = kernel[-1] = 0.5
        kernel /= width
    return np.convolve(values, kernel, mode="same")


def classify_peaks(
    dist: ProbabilityDistribution | NDArray[np.float64],
    n_t: int | None = None,
    config: PeakConfig = PeakConfig(),
) -> PeakStructure:
    """
    Label a distribution TwoPeak (delocalized), SinglePeak (localized) or
    FlatOrThreePeak (critical).

    The distribution is smoothed and its prominent local maxima located.
    A tallest peak in the central zone gives SinglePeak unless an outer peak
    of at least ``side_fraction`` of its height flanks it (three-peak) or it
    is wider than ``flat_width`` times n_t at half height (flat).
    A tallest peak in the outer zone gives TwoPeak when the runner-up is its
    mirror partner on the other side and nothing else reaches ``dominance``.
    Everything else is flat or multi-peaked.
    """
    if isinstance(dist, ProbabilityDistribution):
        values = dist.values
        n_t = dist.time if n_t is None else n_t
    else:
        values = np.asarray(dist, dtype=float)
    n_max = (len(values) - 1) // 2
    if not n_t:
        n_t = n_max
    s = smooth(values, config.window(n_t))
    top = s.max()
    if not top > 0:
        return PeakStructure(PeakLabel.FLAT_OR_THREE_PEAK)
    rel_s = np.round(s / top, config.tie_digits)
    padded = np.concatenate(([0.0], rel_s, [0.0]))
    idx, _ = find_peaks(padded, prominence=config.prominence)
    widths = peak_widths(padded, idx, rel_height=0.5)[0]
    idx = idx - 1
    heights = s[idx]
    order = np.argsort(-rel_s[idx], kind="stable")
    pos = idx[order] - n_max
    rel = rel_s[idx][order] / rel_s[idx][order][0]

    central = np.abs(pos) <= config.central_fraction * n_t
    outer = np.abs(pos) >= config.outer_fraction * n_t
    if central[0]:
        three = bool(np.any(outer & (rel >= config.side_fraction)))
        flat = widths[order][0] > config.flat_width * n_t
        label = PeakLabel.FLAT_OR_THREE_PEAK if three or flat else PeakLabel.SINGLE_PEAK
    elif (
        outer[0]
        and len(pos) >= 2
        and outer[1]
        and pos[0] * pos[1] < 0
        and (len(pos) == 2 or rel[2] < config.dominance)
    ):
        label = PeakLabel.TWO_PEAK
    else:
        label = PeakLabel.FLAT_OR_THREE_PEAK

    by_pos = np.argsort(pos, kind="stable")
    return PeakStructure(
        label,
        [int(v) for v in pos[by_pos]],
        [float(v) for v in heights[order][by_pos]],
    )
