"""Shared domain types for the two-magnet spin-pair experiment.

Angles are stored in degrees, normalized into [0, 360); trigonometry
converts to radians at the point of use, so common configuration values
(0, 120, 180, 240) stay exact in configs and in arithmetic on them.

All types here are immutable values and safe to share between
concurrent tasks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

#: Absolute tolerance for probability-vector normalization checks.
PROB_ATOL = 1e-12


class EprbError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(EprbError, ValueError):
    """An input violates a documented contract."""


class DomainMismatchError(ValidationError):
    """A setting pair (or policy) falls outside a model's domain."""


class NoDataError(EprbError):
    """An estimator was asked to summarize an empty record set."""


@dataclass(frozen=True)
class Angle:
    """A magnet orientation in degrees, already normalized into [0, 360)."""

    degrees: float

    def __post_init__(self) -> None:
        if not isinstance(self.degrees, (int, float)) or not math.isfinite(self.degrees):
            raise ValidationError(f"angle must be a finite number, got {self.degrees!r}")
        if not 0.0 <= self.degrees < 360.0:
            raise ValidationError(
                f"angle must lie in [0, 360), got {self.degrees!r}; use normalize_angle()"
            )
        object.__setattr__(self, "degrees", float(self.degrees))

    @property
    def radians(self) -> float:
        return math.radians(self.degrees)

    def __str__(self) -> str:
        return f"{self.degrees:g}°"


def normalize_angle(degrees: float) -> Angle:
    """Reduce an angle in degrees to its representative in [0, 360).

    Idempotent, and invariant under shifts by whole turns. Non-finite
    input is rejected.
    """
    if not isinstance(degrees, (int, float)) or not math.isfinite(degrees):
        raise ValidationError(f"angle must be a finite number, got {degrees!r}")
    reduced = float(degrees) % 360.0
    # Tiny negative inputs can round up to exactly 360.0.
    if reduced == 360.0:
        reduced = 0.0
    return Angle(reduced)


class SettingLabel(Enum):
    """One of the three named magnet settings."""

    A = "a"
    B = "b"
    C = "c"

    @property
    def index(self) -> int:
        return _LABEL_INDEX[self]

    def __str__(self) -> str:
        return self.value


LABELS: tuple[SettingLabel, SettingLabel, SettingLabel] = (
    SettingLabel.A,
    SettingLabel.B,
    SettingLabel.C,
)
_LABEL_INDEX = {label: i for i, label in enumerate(LABELS)}

#: The nine ordered label pairs in row-major (theta-label, phi-label) order.
LABEL_PAIRS: tuple[tuple[SettingLabel, SettingLabel], ...] = tuple(
    (t, p) for t in LABELS for p in LABELS
)


@dataclass(frozen=True)
class SettingPair:
    """The two chosen magnet angles: ``theta`` for magnet 1, ``phi`` for magnet 2."""

    theta: Angle
    phi: Angle

    @classmethod
    def from_degrees(cls, theta_deg: float, phi_deg: float) -> "SettingPair":
        return cls(normalize_angle(theta_deg), normalize_angle(phi_deg))

    @property
    def difference_deg(self) -> float:
        """Signed angle difference theta - phi, in (-360, 360) degrees."""
        return self.theta.degrees - self.phi.degrees

    def __str__(self) -> str:
        return f"(θ={self.theta.degrees:g}, φ={self.phi.degrees:g})"


def half_difference(pair: SettingPair) -> float:
    """Half the signed setting difference, (theta - phi)/2, in degrees.

    The value is ambiguous modulo 180 degrees; callers only ever feed it
    into squared trigonometric functions, which are insensitive to that.
    """
    return pair.difference_deg / 2.0


@dataclass(frozen=True)
class LabelBinding:
    """Assignment of a concrete angle to each of the three setting labels.

    Degenerate bindings (two labels sharing an angle) are allowed; angle
    equality is decided by exact comparison of normalized values, and an
    ambiguous angle resolves to the first matching label in (a, b, c)
    order.
    """

    a: Angle
    b: Angle
    c: Angle

    @classmethod
    def from_degrees(cls, a: float, b: float, c: float) -> "LabelBinding":
        return cls(normalize_angle(a), normalize_angle(b), normalize_angle(c))

    def angle_of(self, label: SettingLabel) -> Angle:
        return (self.a, self.b, self.c)[label.index]

    def label_of(self, angle: Angle) -> SettingLabel:
        """Resolve an angle back to its label; raises if the angle is unbound."""
        for label in LABELS:
            if self.angle_of(label) == angle:
                return label
        raise DomainMismatchError(
            f"angle {angle} is not bound to any setting label in {self}"
        )

    def pair_of(self, theta_label: SettingLabel, phi_label: SettingLabel) -> SettingPair:
        return SettingPair(self.angle_of(theta_label), self.angle_of(phi_label))

    def labels_of(self, pair: SettingPair) -> tuple[SettingLabel, SettingLabel]:
        return self.label_of(pair.theta), self.label_of(pair.phi)

    def __str__(self) -> str:
        return f"a={self.a.degrees:g}, b={self.b.degrees:g}, c={self.c.degrees:g}"


#: The binding that realizes the stock three-setting geometry.
DEFAULT_BINDING = LabelBinding.from_degrees(0.0, 120.0, 240.0)


class Outcome(Enum):
    """A single-particle measurement result: spin up (+) or spin down (-)."""

    UP = "+"
    DOWN = "-"

    @property
    def opposite(self) -> "Outcome":
        return Outcome.DOWN if self is Outcome.UP else Outcome.UP

    def __str__(self) -> str:
        return self.value


class JointOutcome(Enum):
    """A joint result for the two particles, in canonical order ++, --, +-, -+.

    The canonical order is load-bearing: serialized probability vectors
    and inverse-CDF sampling both walk it, which is what makes seeded
    runs reproducible across implementations.
    """

    UP_UP = "++"
    DOWN_DOWN = "--"
    UP_DOWN = "+-"
    DOWN_UP = "-+"

    @classmethod
    def of(cls, first: Outcome, second: Outcome) -> "JointOutcome":
        return _JOINT_BY_PARTS[(first, second)]

    @property
    def first(self) -> Outcome:
        return Outcome(self.value[0])

    @property
    def second(self) -> Outcome:
        return Outcome(self.value[1])

    @property
    def opposite_spins(self) -> bool:
        return self.value[0] != self.value[1]

    @property
    def index(self) -> int:
        """Position in the canonical order."""
        return _JOINT_INDEX[self]

    def __str__(self) -> str:
        return self.value


JOINT_OUTCOMES: tuple[JointOutcome, JointOutcome, JointOutcome, JointOutcome] = (
    JointOutcome.UP_UP,
    JointOutcome.DOWN_DOWN,
    JointOutcome.UP_DOWN,
    JointOutcome.DOWN_UP,
)
_JOINT_INDEX = {o: i for i, o in enumerate(JOINT_OUTCOMES)}
_JOINT_BY_PARTS = {(o.first, o.second): o for o in JOINT_OUTCOMES}


@dataclass(frozen=True)
class JointDistribution:
    """A normalized probability vector over the four joint outcomes.

    Entries follow the canonical outcome order. Construction rejects any
    vector with an entry outside [0, 1] or a total further than
    ``PROB_ATOL`` from 1.
    """

    probabilities: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probabilities)
        if len(probs) != 4:
            raise ValidationError(f"expected 4 probabilities, got {len(probs)}")
        for p, outcome in zip(probs, JOINT_OUTCOMES):
            if not math.isfinite(p) or not 0.0 <= p <= 1.0:
                raise ValidationError(f"P({outcome}) = {p!r} is outside [0, 1]")
        total = math.fsum(probs)
        if abs(total - 1.0) > PROB_ATOL:
            raise ValidationError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probabilities", probs)

    @classmethod
    def from_mapping(cls, mapping: Mapping[JointOutcome, float]) -> "JointDistribution":
        return cls(tuple(mapping.get(o, 0.0) for o in JOINT_OUTCOMES))

    def prob(self, outcome: JointOutcome) -> float:
        return self.probabilities[outcome.index]

    @property
    def opposite_spin_probability(self) -> float:
        return self.prob(JointOutcome.UP_DOWN) + self.prob(JointOutcome.DOWN_UP)

    def marginal_first(self, outcome: Outcome) -> float:
        """Marginal probability that particle 1 shows ``outcome``."""
        return math.fsum(
            p for p, o in zip(self.probabilities, JOINT_OUTCOMES) if o.first is outcome
        )

    def marginal_second(self, outcome: Outcome) -> float:
        """Marginal probability that particle 2 shows ``outcome``."""
        return math.fsum(
            p for p, o in zip(self.probabilities, JOINT_OUTCOMES) if o.second is outcome
        )

    def as_dict(self) -> dict[str, float]:
        return {o.value: p for o, p in zip(JOINT_OUTCOMES, self.probabilities)}


def inverse_cdf_index(probabilities: Sequence[float], u: float) -> int:
    """Map a uniform draw ``u`` in [0, 1) to an index by inverse CDF.

    Walks the sequence in order, accumulating a running total, and
    returns the first index whose cumulative probability exceeds ``u``.
    Zero-probability entries can never be selected; if rounding leaves
    the final total fractionally below ``u``, the last nonzero entry is
    returned.
    """
    cumulative = 0.0
    last_nonzero = -1
    for i, p in enumerate(probabilities):
        if p > 0.0:
            last_nonzero = i
        cumulative += p
        if u < cumulative:
            return i
    if last_nonzero < 0:
        raise ValidationError("cannot sample: all probabilities are zero")
    return last_nonzero


def validate_weights(weights: Iterable[float], expected_len: int) -> tuple[float, ...]:
    """Check a user-supplied probability vector: length, range, normalization."""
    ws = tuple(float(w) for w in weights)
    if len(ws) != expected_len:
        raise ValidationError(f"expected {expected_len} weights, got {len(ws)}")
    for i, w in enumerate(ws):
        if not math.isfinite(w) or w < 0.0 or w > 1.0:
            raise ValidationError(f"weight[{i}] = {w!r} is outside [0, 1]")
    total = math.fsum(ws)
    if abs(total - 1.0) > PROB_ATOL:
        raise ValidationError(f"weights sum to {total!r}, not 1")
    return ws
