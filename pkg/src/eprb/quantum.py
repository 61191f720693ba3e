"""Exact predictions for the maximally anti-correlated spin-pair state.

The state of interest assigns, at a setting pair with half-difference
d = (theta - phi)/2, the amplitudes

    ++ : (-i/sqrt(2)) sin d      +- : (+1/sqrt(2)) cos d
    -- : (+i/sqrt(2)) sin d      -+ : (-1/sqrt(2)) cos d

so the joint probabilities are (1/2)sin^2(d) for the equal-spin outcomes
and (1/2)cos^2(d) for the opposite-spin outcomes. Probabilities are
evaluated through the double-angle identity (1 -/+ cos(theta - phi))/4,
which lands exactly on 0 and 1/2 in floating point for the degenerate
geometries (equal settings, settings 180 degrees apart). Amplitudes keep
the phase convention above verbatim so amplitude-level comparisons are
bit-stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import (
    JOINT_OUTCOMES,
    JointDistribution,
    JointOutcome,
    SettingPair,
    half_difference,
)

_SQRT_HALF = math.sqrt(0.5)


@dataclass(frozen=True)
class SingletAmplitudes:
    """Expansion coefficients over the four joint spin product states.

    Entries follow the canonical outcome order; the squared magnitudes
    sum to 1 and are pairwise equal within each of the equal-spin and
    opposite-spin pairs.
    """

    amplitudes: tuple[complex, complex, complex, complex]

    def amplitude(self, outcome: JointOutcome) -> complex:
        return self.amplitudes[outcome.index]

    def probability(self, outcome: JointOutcome) -> float:
        return abs(self.amplitude(outcome)) ** 2


def singlet_amplitudes(pair: SettingPair) -> SingletAmplitudes:
    """The four expansion coefficients at the given setting pair."""
    d = math.radians(half_difference(pair))
    s = _SQRT_HALF * math.sin(d)
    c = _SQRT_HALF * math.cos(d)
    return SingletAmplitudes(
        (
            complex(0.0, -s),  # ++
            complex(0.0, +s),  # --
            complex(+c, 0.0),  # +-
            complex(-c, 0.0),  # -+
        )
    )


def _equal_opposite_probs(pair: SettingPair) -> tuple[float, float]:
    """(P per equal-spin outcome, P per opposite-spin outcome)."""
    cos_diff = math.cos(math.radians(pair.difference_deg))
    return (1.0 - cos_diff) / 4.0, (1.0 + cos_diff) / 4.0


def joint_probability(pair: SettingPair, outcome: JointOutcome) -> float:
    """Probability of one joint outcome at the given setting pair."""
    equal, opposite = _equal_opposite_probs(pair)
    return opposite if outcome.opposite_spins else equal


def quantum_distribution(pair: SettingPair) -> JointDistribution:
    """The full joint distribution at the given setting pair."""
    equal, opposite = _equal_opposite_probs(pair)
    return JointDistribution((equal, equal, opposite, opposite))


def opposite_spin_probability(pair: SettingPair) -> float:
    """P(+-) + P(-+) = cos^2((theta - phi)/2)."""
    return (1.0 + math.cos(math.radians(pair.difference_deg))) / 2.0


def correlation(pair: SettingPair) -> float:
    """Expectation of the +/-1 outcome product: -cos(theta - phi).

    Standard convention E = P(++) + P(--) - P(+-) - P(-+), which for
    this state collapses to -cos of the setting difference.
    """
    return -math.cos(math.radians(pair.difference_deg))
