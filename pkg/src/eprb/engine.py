"""Trial engine: reproducible runs against any model and setting policy.

Randomness contract. A run is fully determined by (model, policy, n,
seed). The stream is a counter-based generator keyed by the seed, and
trial ``i`` owns the block range ``[i * K, (i + 1) * K)`` where ``K`` is
the per-trial block budget. Within its blocks a trial reads its uniforms
in a fixed order: policy draws first, then the model's prepare draws,
then its measure draws. Any subset of trials can therefore be
regenerated in isolation, in any order, with results identical to a
sequential run.
"""

from __future__ import annotations

import abc
import json
import math
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .core import (
    DEFAULT_BINDING,
    JOINT_OUTCOMES,
    LABEL_PAIRS,
    JointOutcome,
    LabelBinding,
    NoDataError,
    SettingPair,
    ValidationError,
)
from .hvmodels import Labels, Model

# Each counter block of the generator yields this many raw outputs, and
# one uniform double consumes exactly one of them.
_OUTPUTS_PER_BLOCK = 4

_CHUNK_TRIALS = 1 << 18

_EMPTY_ROW = np.empty(0, dtype=np.float64)

#: Two-sided 95% quantile of the standard normal, frozen for stable output.
Z95 = 1.959963984540054


@dataclass(frozen=True)
class SettingChoice:
    """One entry in a policy's menu: an angle pair, plus the label pair
    that produced it when the policy works over labels."""

    pair: SettingPair
    labels: Labels | None = None


class SettingPolicy(abc.ABC):
    """How each trial picks its setting pair.

    A policy exposes a finite menu of choices and maps (trial index,
    policy draws) to a menu position. It consumes exactly ``draws``
    uniforms per trial, deterministic policies consume none.
    """

    name: str
    draws: int
    choices: tuple[SettingChoice, ...]

    @abc.abstractmethod
    def choice_index(self, trial: int, u: Sequence[float]) -> int:
        """Menu position for one trial."""

    @abc.abstractmethod
    def batch_choice_indices(self, trials: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Vectorized twin of ``choice_index``; must match it trial for trial.
        ``u`` has shape (len(trials), draws)."""


class FixedPairPolicy(SettingPolicy):
    """Every trial measures the same angle pair."""

    name = "fixed"
    draws = 0

    def __init__(self, pair: SettingPair, labels: Labels | None = None):
        self.choices = (SettingChoice(pair, labels),)

    def choice_index(self, trial: int, u: Sequence[float]) -> int:
        return 0

    def batch_choice_indices(self, trials: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.zeros(len(trials), dtype=np.int64)


class UniformLabelPairsPolicy(SettingPolicy):
    """Each trial draws one of the nine ordered label pairs uniformly."""

    name = "labels"
    draws = 1

    def __init__(self, binding: LabelBinding = DEFAULT_BINDING):
        self.binding = binding
        self.choices = tuple(
            SettingChoice(binding.pair_of(l1, l2), (l1, l2)) for l1, l2 in LABEL_PAIRS
        )

    def choice_index(self, trial: int, u: Sequence[float]) -> int:
        return min(int(u[0] * 9.0), 8)

    def batch_choice_indices(self, trials: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.minimum((u[:, 0] * 9.0).astype(np.int64), 8)


class IndependentUniformLabelsPolicy(SettingPolicy):
    """Each magnet draws its own label uniformly, independent of the other.

    The menu matches the row-major label-pair order, so the joint choice
    distribution is the same as ``UniformLabelPairsPolicy``; only the
    draw accounting differs (two uniforms, one per side).
    """

    name = "labels-independent"
    draws = 2

    def __init__(self, binding: LabelBinding = DEFAULT_BINDING):
        self.binding = binding
        self.choices = tuple(
            SettingChoice(binding.pair_of(l1, l2), (l1, l2)) for l1, l2 in LABEL_PAIRS
        )

    def choice_index(self, trial: int, u: Sequence[float]) -> int:
        first = min(int(u[0] * 3.0), 2)
        second = min(int(u[1] * 3.0), 2)
        return 3 * first + second

    def batch_choice_indices(self, trials: np.ndarray, u: np.ndarray) -> np.ndarray:
        first = np.minimum((u[:, 0] * 3.0).astype(np.int64), 2)
        second = np.minimum((u[:, 1] * 3.0).astype(np.int64), 2)
        return 3 * first + second


class DeltaScanPolicy(SettingPolicy):
    """Sweep of setting differences: trial ``i`` measures difference
    ``deltas_deg[i mod k]`` (as theta = delta, phi = 0).

    Every difference keeps its own menu slot even when two of them
    normalize to the same angle pair, so sweep points never merge in
    downstream summaries.
    """

    name = "scan"
    draws = 0

    def __init__(self, deltas_deg: Sequence[float]):
        deltas = tuple(float(d) for d in deltas_deg)
        if not deltas:
            raise ValidationError("a scan needs at least one setting difference")
        for d in deltas:
            if not math.isfinite(d):
                raise ValidationError(f"setting difference {d!r} is not finite")
        self.deltas_deg = deltas
        self.choices = tuple(
            SettingChoice(SettingPair.from_degrees(d, 0.0), None) for d in deltas
        )

    def choice_index(self, trial: int, u: Sequence[float]) -> int:
        return trial % len(self.choices)

    def batch_choice_indices(self, trials: np.ndarray, u: np.ndarray) -> np.ndarray:
        return trials % len(self.choices)


@dataclass(frozen=True)
class RunRecord:
    """One completed trial."""

    trial: int
    pair: SettingPair
    labels: Labels | None
    outcome: JointOutcome
    hidden: str | None


def _validate_run(n: int, seed: int) -> None:
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise ValidationError(f"trial count must be a non-negative integer, got {n!r}")
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ValidationError(f"seed must be an integer in [0, 2**64), got {seed!r}")


def _stream_layout(model: Model, policy: SettingPolicy) -> tuple[int, int, int]:
    """(total draws per trial, blocks per trial, generated width per trial)."""
    total = policy.draws + model.prepare_draws + model.measure_draws
    blocks = (total + _OUTPUTS_PER_BLOCK - 1) // _OUTPUTS_PER_BLOCK
    return total, blocks, blocks * _OUTPUTS_PER_BLOCK


def _validate_choices(model: Model, policy: SettingPolicy) -> None:
    for choice in policy.choices:
        model.validate_pair(choice.pair, choice.labels)


def derive_seed(seed: int, index: int) -> int:
    """Independent child seed number ``index`` of a base seed.

    Pure function of its arguments; repeated sub-runs (sweep points,
    replicate batches) get non-overlapping streams without manual seed
    bookkeeping.
    """
    _validate_run(0, seed)
    if not isinstance(index, int) or isinstance(index, bool) or index < 0:
        raise ValidationError(f"child index must be a non-negative integer, got {index!r}")
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return int(sequence.generate_state(1, np.uint64)[0])


def run_experiment(
    model: Model,
    policy: SettingPolicy,
    n: int,
    seed: int,
    trial_indices: Iterable[int] | None = None,
) -> list[RunRecord]:
    """Run trials one at a time, keeping the full per-trial record.

    With ``trial_indices`` the same trials are regenerated by random
    access into the stream, in the order given; any order or subset of
    ``range(n)`` returns records identical to the sequential run's.
    """
    _validate_run(n, seed)
    _validate_choices(model, policy)
    total, blocks, width = _stream_layout(model, policy)
    prepare_end = policy.draws + model.prepare_draws

    def sequential() -> Iterator[tuple[int, np.ndarray]]:
        gen = np.random.Generator(np.random.Philox(key=seed))
        for trial in range(n):
            yield trial, gen.random(width) if width else _EMPTY_ROW

    def random_access() -> Iterator[tuple[int, np.ndarray]]:
        for raw in trial_indices:
            trial = int(raw)
            if not 0 <= trial < n:
                raise ValidationError(f"trial index {trial} outside [0, {n})")
            bitgen = np.random.Philox(key=seed)
            bitgen.advance(trial * blocks)
            gen = np.random.Generator(bitgen)
            yield trial, gen.random(width) if width else _EMPTY_ROW

    records = []
    for trial, u in sequential() if trial_indices is None else random_access():
        choice = policy.choices[policy.choice_index(trial, u[: policy.draws])]
        state = model.prepare(u[policy.draws : prepare_end])
        outcome = model.measure(state, choice.pair, choice.labels, u[prepare_end:total])
        hidden = model.hidden_summary(state, choice.pair, choice.labels)
        records.append(RunRecord(trial, choice.pair, choice.labels, outcome, hidden))
    return records


def run_counts(model: Model, policy: SettingPolicy, n: int, seed: int) -> np.ndarray:
    """Outcome counts of the same run ``run_experiment`` would produce,
    computed in vectorized chunks.

    Returns an int64 array of shape (len(policy.choices), 4), outcomes in
    canonical order. Useful when only tallies matter; at large ``n`` this
    is orders of magnitude faster than materializing records.
    """
    _validate_run(n, seed)
    _validate_choices(model, policy)
    total, _, width = _stream_layout(model, policy)
    prepare_end = policy.draws + model.prepare_draws

    counts = np.zeros((len(policy.choices), 4), dtype=np.int64)
    gen = np.random.Generator(np.random.Philox(key=seed))
    for start in range(0, n, _CHUNK_TRIALS):
        m = min(_CHUNK_TRIALS, n - start)
        if width:
            u = gen.random(m * width).reshape(m, width)[:, :total]
        else:
            u = np.zeros((m, 0))
        trials = np.arange(start, start + m, dtype=np.int64)
        indices = policy.batch_choice_indices(trials, u[:, : policy.draws])
        u_prepare = u[:, policy.draws : prepare_end]
        u_measure = u[:, prepare_end:total]
        for k, choice in enumerate(policy.choices):
            mask = indices == k
            if not mask.any():
                continue
            outcomes = model.batch_outcomes(
                choice.pair, choice.labels, u_prepare[mask], u_measure[mask]
            )
            counts[k] += np.bincount(outcomes, minlength=4)
    return counts


def wilson_interval(count: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Stays inside [0, 1] by construction and behaves sensibly at counts
    of 0 and n, where the plain normal interval collapses.
    """
    if n <= 0:
        raise NoDataError("cannot form an interval from zero trials")
    if not 0 <= count <= n:
        raise ValidationError(f"count {count} outside [0, {n}]")
    p_hat = count / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p_hat + z2 / (2.0 * n)) / denom
    half = (z / denom) * math.sqrt(p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n))
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Outcome tallies from a run, with score-interval uncertainty."""

    counts: tuple[int, int, int, int]

    def __post_init__(self) -> None:
        counts = tuple(int(c) for c in self.counts)
        if len(counts) != 4:
            raise ValidationError(f"expected 4 counts, got {len(counts)}")
        if any(c < 0 for c in counts):
            raise ValidationError(f"negative count in {counts}")
        if sum(counts) == 0:
            raise NoDataError("no trials to summarize")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_counts(cls, counts: Iterable[int]) -> "EmpiricalDistribution":
        return cls(tuple(int(c) for c in counts))

    @property
    def n(self) -> int:
        return sum(self.counts)

    def count(self, outcome: JointOutcome) -> int:
        return self.counts[outcome.index]

    def p_hat(self, outcome: JointOutcome) -> float:
        return self.count(outcome) / self.n

    def interval(self, outcome: JointOutcome) -> tuple[float, float]:
        return wilson_interval(self.count(outcome), self.n)

    @property
    def opposite_spin_count(self) -> int:
        return sum(
            c for c, o in zip(self.counts, JOINT_OUTCOMES) if o.opposite_spins
        )

    @property
    def opposite_spin_rate(self) -> float:
        return self.opposite_spin_count / self.n

    def opposite_spin_interval(self) -> tuple[float, float]:
        return wilson_interval(self.opposite_spin_count, self.n)


def estimate(
    records: Iterable[RunRecord],
    pair: SettingPair | None = None,
    labels: Labels | None = None,
) -> EmpiricalDistribution:
    """Empirical outcome distribution, optionally restricted to trials at
    one angle pair and/or one label pair. Raises ``NoDataError`` when the
    restriction matches nothing."""
    counts = [0, 0, 0, 0]
    for record in records:
        if pair is not None and record.pair != pair:
            continue
        if labels is not None and record.labels != labels:
            continue
        counts[record.outcome.index] += 1
    if sum(counts) == 0:
        raise NoDataError("no trials match the requested settings")
    return EmpiricalDistribution(tuple(counts))


@contextmanager
def atomic_text_writer(path: str | os.PathLike):
    """Open a text file for writing such that the final name either gets
    the complete content or keeps its previous state."""
    target = os.fspath(path)
    directory = os.path.dirname(target) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=os.path.basename(target) + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            yield handle
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def record_json_dict(record: RunRecord, model_name: str) -> dict:
    """The wire form of one trial record (field order is part of the
    format: trial, theta_deg, phi_deg, a, b, model, hidden)."""
    return {
        "trial": record.trial,
        "theta_deg": record.pair.theta.degrees,
        "phi_deg": record.pair.phi.degrees,
        "a": record.outcome.first.value,
        "b": record.outcome.second.value,
        "model": model_name,
        "hidden": record.hidden,
    }


def write_records_jsonl(
    path: str | os.PathLike, records: Iterable[RunRecord], model_name: str
) -> None:
    """Write trial records as JSON Lines, one object per trial, in the
    order given. Identical runs produce byte-identical files."""
    with atomic_text_writer(path) as handle:
        for record in records:
            handle.write(json.dumps(record_json_dict(record, model_name)))
            handle.write("\n")


def write_summary_csv(path: str | os.PathLike, empirical: EmpiricalDistribution) -> None:
    """Write per-outcome tallies with Wilson 95% intervals as CSV."""
    with atomic_text_writer(path) as handle:
        handle.write("outcome,count,p_hat,ci_lo,ci_hi\n")
        for outcome in JOINT_OUTCOMES:
            lo, hi = empirical.interval(outcome)
            handle.write(
                f"{outcome.value},{empirical.count(outcome)},"
                f"{empirical.p_hat(outcome)!r},{lo!r},{hi!r}\n"
            )
