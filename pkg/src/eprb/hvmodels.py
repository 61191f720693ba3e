"""Outcome models: two hidden-variable constructions and a direct sampler.

All three live behind one contract so the run engine and the audit
tooling never branch on model identity. A model splits each trial into
two phases: ``prepare`` consumes a fixed number of uniform draws and
builds the per-pair hidden state, ``measure`` consumes another fixed
number of draws and maps (state, settings) to a joint outcome. The two
counts are advertised up front so callers can budget random streams
exactly.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .core import (
    DEFAULT_BINDING,
    JOINT_OUTCOMES,
    LABEL_PAIRS,
    DomainMismatchError,
    JointDistribution,
    JointOutcome,
    LabelBinding,
    Outcome,
    SettingLabel,
    SettingPair,
    ValidationError,
    inverse_cdf_index,
    validate_weights,
)
from .quantum import joint_probability, quantum_distribution

Labels = tuple[SettingLabel, SettingLabel]


@dataclass(frozen=True)
class InstructionSet:
    """Deterministic response plan carried by one particle pair.

    ``spin1`` lists the outcome particle 1 reports at each setting label,
    in label order (a, b, c). Particle 2 always reports the opposite, so
    equal settings are perfectly anti-correlated by construction.
    """

    spin1: tuple[Outcome, Outcome, Outcome]

    @property
    def spin2(self) -> tuple[Outcome, Outcome, Outcome]:
        return tuple(o.opposite for o in self.spin1)

    @property
    def index(self) -> int:
        """Position in the canonical enumeration: spin1 read as a 3-bit
        counter with Up = 0 and label a as the leading bit."""
        value = 0
        for outcome in self.spin1:
            value = 2 * value + (1 if outcome is Outcome.DOWN else 0)
        return value

    def outcome_for(self, label1: SettingLabel, label2: SettingLabel) -> JointOutcome:
        return JointOutcome.of(self.spin1[label1.index], self.spin2[label2.index])

    def opposite_spin_fraction(self) -> Fraction:
        """Exact fraction of opposite-spin results over the six unequal
        ordered label pairs, the quantity the 1/3 floor is about."""
        unequal = [(l1, l2) for l1, l2 in LABEL_PAIRS if l1 is not l2]
        hits = sum(1 for l1, l2 in unequal if self.outcome_for(l1, l2).opposite_spins)
        return Fraction(hits, len(unequal))


def enumerate_instruction_sets() -> tuple[InstructionSet, ...]:
    """All eight response plans, in canonical order."""
    sets = []
    for code in range(8):
        bits = ((code >> 2) & 1, (code >> 1) & 1, code & 1)
        spins = tuple(Outcome.DOWN if bit else Outcome.UP for bit in bits)
        sets.append(InstructionSet(spins))
    return tuple(sets)


INSTRUCTION_SETS = enumerate_instruction_sets()

# 0.125 is exact in binary, so uniform mixtures stay exact under summation.
UNIFORM_SET_WEIGHTS = (0.125,) * len(INSTRUCTION_SETS)


def sample_pair_entry(pair: SettingPair, u: float) -> JointOutcome:
    """Draw one joint outcome from the exact distribution at ``pair``."""
    dist = quantum_distribution(pair)
    return JOINT_OUTCOMES[inverse_cdf_index(dist.probabilities, u)]


def vector_inverse_cdf(probabilities: Sequence[float], u: np.ndarray) -> np.ndarray:
    """Vectorized twin of ``core.inverse_cdf_index``.

    Must select exactly the same indices: zero-probability entries are
    unreachable, and draws past the accumulated total (float shortfall)
    fall back to the last nonzero entry.
    """
    cdf = np.cumsum(probabilities)
    last_nonzero = max(i for i, p in enumerate(probabilities) if p > 0.0)
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, last_nonzero)


def _resolve_labels(binding: LabelBinding, pair: SettingPair,
                    labels: Labels | None) -> Labels:
    """Labels for a trial, derived from the binding when not given.

    When both are given they must agree, otherwise a direct caller could
    silently measure at angles the labels do not describe.
    """
    if labels is None:
        return binding.label_of(pair.theta), binding.label_of(pair.phi)
    expected = binding.pair_of(labels[0], labels[1])
    if expected != pair:
        raise DomainMismatchError(
            f"labels ({labels[0].value}, {labels[1].value}) mean "
            f"({expected.theta.degrees}, {expected.phi.degrees}) degrees under "
            f"this binding, not ({pair.theta.degrees}, {pair.phi.degrees})"
        )
    return labels


class Model(abc.ABC):
    """Contract shared by every outcome model.

    ``prepare`` consumes exactly ``prepare_draws`` uniforms from the
    trial's stream and returns the hidden state for one particle pair;
    ``measure`` consumes exactly ``measure_draws`` more and returns the
    joint outcome. ``batch_outcomes`` is the vectorized equivalent for a
    block of trials that share one setting pair, and must reproduce the
    scalar path draw for draw.
    """

    name: str
    prepare_draws: int
    measure_draws: int

    @abc.abstractmethod
    def prepare(self, u: Sequence[float]) -> object:
        """Hidden state for one pair, built from ``prepare_draws`` uniforms."""

    @abc.abstractmethod
    def measure(self, state: object, pair: SettingPair, labels: Labels | None,
                u: Sequence[float]) -> JointOutcome:
        """Joint outcome of measuring ``state`` at the given settings."""

    @abc.abstractmethod
    def exact_distribution(self, pair: SettingPair,
                           labels: Labels | None = None) -> JointDistribution:
        """Closed-form outcome distribution at the given settings."""

    @abc.abstractmethod
    def lambda_distribution(self, pair: SettingPair,
                            labels: Labels | None = None) -> JointDistribution:
        """Settings-indexed law of the hidden record behind one trial.

        This is the object the measurement-independence audit compares
        across setting pairs; see each model for what it projects.
        """

    @abc.abstractmethod
    def batch_outcomes(self, pair: SettingPair, labels: Labels | None,
                       u_prepare: np.ndarray, u_measure: np.ndarray) -> np.ndarray:
        """Canonical outcome indices for a block of trials at one setting
        pair. ``u_prepare`` is (n, prepare_draws), ``u_measure`` is
        (n, measure_draws)."""

    def validate_pair(self, pair: SettingPair, labels: Labels | None) -> None:
        """Reject settings this model cannot measure. Default accepts all."""

    def hidden_summary(self, state: object, pair: SettingPair,
                       labels: Labels | None) -> str | None:
        """Digest of the hidden state for the trial record, or None when
        the model keeps nothing beyond the outcome itself. Call after
        ``measure`` on the same arguments."""
        return None


class MerminModel(Model):
    """Instruction-set model: the source attaches a response plan to every
    pair, drawn from a weight vector over the eight plans, independent of
    the settings chosen later."""

    name = "mermin"
    prepare_draws = 1
    measure_draws = 0

    def __init__(self, weights: Sequence[float] | None = None,
                 binding: LabelBinding = DEFAULT_BINDING):
        if weights is None:
            weights = UNIFORM_SET_WEIGHTS
        self.weights = validate_weights(weights, len(INSTRUCTION_SETS))
        self.binding = binding

    def prepare(self, u: Sequence[float]) -> InstructionSet:
        return INSTRUCTION_SETS[inverse_cdf_index(self.weights, u[0])]

    def measure(self, state: InstructionSet, pair: SettingPair,
                labels: Labels | None, u: Sequence[float]) -> JointOutcome:
        l1, l2 = _resolve_labels(self.binding, pair, labels)
        return state.outcome_for(l1, l2)

    def exact_distribution(self, pair: SettingPair,
                           labels: Labels | None = None) -> JointDistribution:
        l1, l2 = _resolve_labels(self.binding, pair, labels)
        probs = [0.0, 0.0, 0.0, 0.0]
        for weight, instr in zip(self.weights, INSTRUCTION_SETS):
            probs[instr.outcome_for(l1, l2).index] += weight
        return JointDistribution(tuple(probs))

    def lambda_distribution(self, pair: SettingPair,
                            labels: Labels | None = None) -> JointDistribution:
        """Product of the two per-side response marginals at these settings.

        The plan is drawn before settings exist, so each side's marginal
        is a plain projection of the weight vector; their product is the
        settings-indexed fingerprint the independence audit compares.
        Under uniform weights it is (1/4, 1/4, 1/4, 1/4) exactly for
        every label pair, equal ones included.
        """
        l1, l2 = _resolve_labels(self.binding, pair, labels)
        first = {Outcome.UP: 0.0, Outcome.DOWN: 0.0}
        second = {Outcome.UP: 0.0, Outcome.DOWN: 0.0}
        for weight, instr in zip(self.weights, INSTRUCTION_SETS):
            first[instr.spin1[l1.index]] += weight
            second[instr.spin2[l2.index]] += weight
        return JointDistribution((
            first[Outcome.UP] * second[Outcome.UP],
            first[Outcome.DOWN] * second[Outcome.DOWN],
            first[Outcome.UP] * second[Outcome.DOWN],
            first[Outcome.DOWN] * second[Outcome.UP],
        ))

    def batch_outcomes(self, pair: SettingPair, labels: Labels | None,
                       u_prepare: np.ndarray, u_measure: np.ndarray) -> np.ndarray:
        l1, l2 = _resolve_labels(self.binding, pair, labels)
        table = np.array([instr.outcome_for(l1, l2).index
                          for instr in INSTRUCTION_SETS])
        return table[vector_inverse_cdf(self.weights, u_prepare[:, 0])]

    def validate_pair(self, pair: SettingPair, labels: Labels | None) -> None:
        _resolve_labels(self.binding, pair, labels)

    def hidden_summary(self, state: InstructionSet, pair: SettingPair,
                       labels: Labels | None) -> str | None:
        return str(state.index)


@dataclass
class GrandmaState:
    """Per-pair table of preselected joint outcomes.

    Keyed by label pair in labeled mode and by exact angle-degree pair in
    continuous mode; continuous entries appear lazily at first
    measurement and stick afterwards.
    """

    entries: dict


class GrandmaModel(Model):
    """Setting-dependent table model: the source preselects the joint
    outcome the pair would show at each setting pair.

    Labeled mode ships every pair with a full 3x3 table, one entry per
    ordered label pair, each drawn from the exact distribution at the
    bound angles. Continuous mode draws entries on demand at whatever
    angle pair gets measured, then remembers them, so repeated
    measurement of one pair stays consistent. Table entries are mutually
    independent across cells and across pairs.
    """

    name = "grandma"

    LABELED = "labeled"
    CONTINUOUS = "continuous"

    def __init__(self, mode: str = LABELED,
                 binding: LabelBinding = DEFAULT_BINDING):
        if mode not in (self.LABELED, self.CONTINUOUS):
            raise ValidationError(f"unknown table mode: {mode!r}")
        self.mode = mode
        self.binding = binding
        if mode == self.LABELED:
            self.prepare_draws = len(LABEL_PAIRS)
            self.measure_draws = 0
            # sampling distributions are fixed by the binding; build once
            self._label_dists = tuple(
                quantum_distribution(binding.pair_of(l1, l2)) for l1, l2 in LABEL_PAIRS
            )
        else:
            self.prepare_draws = 0
            self.measure_draws = 1
            self._label_dists = ()

    def prepare(self, u: Sequence[float]) -> GrandmaState:
        if self.mode == self.CONTINUOUS:
            return GrandmaState({})
        entries = {}
        for k, (l1, l2) in enumerate(LABEL_PAIRS):
            dist = self._label_dists[k]
            entries[(l1, l2)] = JOINT_OUTCOMES[inverse_cdf_index(dist.probabilities, u[k])]
        return GrandmaState(entries)

    def measure(self, state: GrandmaState, pair: SettingPair,
                labels: Labels | None, u: Sequence[float]) -> JointOutcome:
        if self.mode == self.LABELED:
            l1, l2 = _resolve_labels(self.binding, pair, labels)
            return state.entries[(l1, l2)]
        key = (pair.theta.degrees, pair.phi.degrees)
        if key not in state.entries:
            state.entries[key] = sample_pair_entry(pair, u[0])
        return state.entries[key]

    def state_from_entries(
        self, entries: Mapping[Labels, JointOutcome]
    ) -> GrandmaState:
        """Labeled-mode state built from explicit table entries.

        All nine ordered label pairs must be present and every entry must
        be possible at its bound angles: equal labels force opposite
        spins, settings 180 degrees apart force equal spins.
        """
        if self.mode != self.LABELED:
            raise ValidationError("explicit tables only make sense in labeled mode")
        if set(entries) != set(LABEL_PAIRS):
            raise ValidationError("table must cover exactly the nine ordered label pairs")
        table = {}
        for l1, l2 in LABEL_PAIRS:
            entry = entries[(l1, l2)]
            pair = self.binding.pair_of(l1, l2)
            if joint_probability(pair, entry) <= 0.0:
                raise ValidationError(
                    f"entry {entry.value} for ({l1.value}, {l2.value}) has "
                    f"probability zero at ({pair.theta.degrees}, "
                    f"{pair.phi.degrees}) degrees"
                )
            table[(l1, l2)] = entry
        return GrandmaState(table)

    def exact_distribution(self, pair: SettingPair,
                           labels: Labels | None = None) -> JointDistribution:
        if self.mode == self.LABELED and labels is not None:
            _resolve_labels(self.binding, pair, labels)
        return quantum_distribution(pair)

    def lambda_distribution(self, pair: SettingPair,
                            labels: Labels | None = None) -> JointDistribution:
        """Law of the table entry consulted at these settings. The table
        is built per setting pair, so this genuinely varies with the
        settings, unlike the instruction-set model."""
        return self.exact_distribution(pair, labels)

    def batch_outcomes(self, pair: SettingPair, labels: Labels | None,
                       u_prepare: np.ndarray, u_measure: np.ndarray) -> np.ndarray:
        if self.mode == self.LABELED:
            l1, l2 = _resolve_labels(self.binding, pair, labels)
            # column layout matches the row-major prepare order
            col = 3 * l1.index + l2.index
            dist = self._label_dists[col]
            return vector_inverse_cdf(dist.probabilities, u_prepare[:, col])
        dist = quantum_distribution(pair)
        return vector_inverse_cdf(dist.probabilities, u_measure[:, 0])

    def validate_pair(self, pair: SettingPair, labels: Labels | None) -> None:
        if self.mode == self.LABELED:
            _resolve_labels(self.binding, pair, labels)

    def hidden_summary(self, state: GrandmaState, pair: SettingPair,
                       labels: Labels | None) -> str | None:
        if self.mode == self.LABELED:
            l1, l2 = _resolve_labels(self.binding, pair, labels)
            return state.entries[(l1, l2)].value
        return state.entries[(pair.theta.degrees, pair.phi.degrees)].value


@dataclass
class QuantumState:
    """Memo of outcomes already drawn for one pair, keyed by angle pair."""

    memo: dict


class QuantumModel(Model):
    """Direct sampler of the exact joint distribution, no hidden mechanism.

    Kept behind the same contract as the hidden-variable models so runs
    and audits compare like for like. Repeated measurement of one pair
    at the same settings replays the first draw.
    """

    name = "quantum"
    prepare_draws = 0
    measure_draws = 1

    def prepare(self, u: Sequence[float]) -> QuantumState:
        return QuantumState({})

    def measure(self, state: QuantumState, pair: SettingPair,
                labels: Labels | None, u: Sequence[float]) -> JointOutcome:
        key = (pair.theta.degrees, pair.phi.degrees)
        if key not in state.memo:
            state.memo[key] = sample_pair_entry(pair, u[0])
        return state.memo[key]

    def exact_distribution(self, pair: SettingPair,
                           labels: Labels | None = None) -> JointDistribution:
        return quantum_distribution(pair)

    def lambda_distribution(self, pair: SettingPair,
                            labels: Labels | None = None) -> JointDistribution:
        """The only per-pair record is the outcome itself; this is its law."""
        return quantum_distribution(pair)

    def batch_outcomes(self, pair: SettingPair, labels: Labels | None,
                       u_prepare: np.ndarray, u_measure: np.ndarray) -> np.ndarray:
        dist = quantum_distribution(pair)
        return vector_inverse_cdf(dist.probabilities, u_measure[:, 0])
