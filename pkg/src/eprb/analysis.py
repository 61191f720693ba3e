"""Certificates and audits on top of the models and the run engine.

Exact quantities (bound certificates, four-correlation combinations,
distribution distances) are computed in closed form, with instruction-set
arithmetic done over rationals so the certified floor is a true fraction
and not a float that happens to print well. Statistical audits compare
run tallies against exact predictions with explicit tolerance bands.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import Callable, Iterable, Sequence

from .core import (
    DEFAULT_BINDING,
    JOINT_OUTCOMES,
    LABEL_PAIRS,
    PROB_ATOL,
    Angle,
    JointDistribution,
    JointOutcome,
    LabelBinding,
    Outcome,
    SettingPair,
    ValidationError,
    normalize_angle,
)
from .engine import (
    DeltaScanPolicy,
    SettingChoice,
    SettingPolicy,
    atomic_text_writer,
    run_counts,
    wilson_interval,
)
from .hvmodels import INSTRUCTION_SETS, Model
from .quantum import correlation, opposite_spin_probability, quantum_distribution

#: Exact floor on the opposite-spin fraction at unequal labels that any
#: instruction-set mixture must respect.
OPPOSITE_SPIN_FLOOR = Fraction(1, 3)


# ---------------------------------------------------------------------------
# instruction-set bound certificate

@dataclass(frozen=True)
class MerminBoundCertificate:
    """Exact opposite-spin fractions of the eight response plans, the
    floor they induce on any mixture, and the exact prediction for the
    same averaged quantity."""

    fractions: tuple[Fraction, ...]
    minimum: Fraction
    maximum: Fraction
    quantum_average: float

    @property
    def quantum_below_floor(self) -> bool:
        """True when no mixture of plans can reach the exact prediction."""
        return self.quantum_average < float(self.minimum)


def certify_mermin_bound(binding: LabelBinding = DEFAULT_BINDING) -> MerminBoundCertificate:
    """Certify the floor by brute-force enumeration over all eight plans.

    Fractions are over the six unequal ordered label pairs, computed in
    exact rational arithmetic. The comparison value is the exact
    opposite-spin probability averaged over the same six pairs at the
    binding's angles.
    """
    fractions = tuple(
        instruction.opposite_spin_fraction() for instruction in INSTRUCTION_SETS
    )
    unequal = [(l1, l2) for l1, l2 in LABEL_PAIRS if l1 is not l2]
    quantum_average = math.fsum(
        opposite_spin_probability(binding.pair_of(l1, l2)) for l1, l2 in unequal
    ) / len(unequal)
    return MerminBoundCertificate(
        fractions=fractions,
        minimum=min(fractions),
        maximum=max(fractions),
        quantum_average=quantum_average,
    )


# ---------------------------------------------------------------------------
# four-correlation (CHSH) combination

@dataclass(frozen=True)
class ChshSettings:
    """Two settings per side for the four-correlation combination."""

    a1: Angle
    a2: Angle
    b1: Angle
    b2: Angle

    @classmethod
    def from_degrees(cls, a1: float, a2: float, b1: float, b2: float) -> "ChshSettings":
        return cls(
            normalize_angle(a1), normalize_angle(a2),
            normalize_angle(b1), normalize_angle(b2),
        )

    @property
    def pairs(self) -> tuple[SettingPair, SettingPair, SettingPair, SettingPair]:
        """The four measured pairs, in the combination's term order."""
        return (
            SettingPair(self.a1, self.b1),
            SettingPair(self.a1, self.b2),
            SettingPair(self.a2, self.b1),
            SettingPair(self.a2, self.b2),
        )


#: Term signs of S = E(a1,b1) - E(a1,b2) + E(a2,b1) + E(a2,b2).
CHSH_SIGNS = (1.0, -1.0, 1.0, 1.0)

#: The standard geometry at which the exact prediction reaches -2*sqrt(2).
CHSH_OPTIMAL_SETTINGS = ChshSettings.from_degrees(0.0, 90.0, 45.0, 135.0)


def chsh_value(
    settings: ChshSettings,
    correlation_fn: Callable[[SettingPair], float] | None = None,
) -> float:
    """S = E(a1,b1) - E(a1,b2) + E(a2,b1) + E(a2,b2).

    Defaults to the exact spin-pair correlation E = -cos(theta - phi).
    """
    fn = correlation if correlation_fn is None else correlation_fn
    return math.fsum(
        sign * fn(pair) for sign, pair in zip(CHSH_SIGNS, settings.pairs)
    )


def distribution_correlation(dist: JointDistribution) -> float:
    """Expectation of the +/-1 outcome product under ``dist``."""
    same = dist.prob(JointOutcome.UP_UP) + dist.prob(JointOutcome.DOWN_DOWN)
    opposite = dist.prob(JointOutcome.UP_DOWN) + dist.prob(JointOutcome.DOWN_UP)
    return same - opposite


def chsh_from_model(model: Model, settings: ChshSettings) -> float:
    """S computed from a model's exact outcome distributions."""
    return chsh_value(
        settings, lambda pair: distribution_correlation(model.exact_distribution(pair))
    )


def local_deterministic_chsh_values() -> tuple[int, ...]:
    """S at every vertex strategy: both sides answer each of their two
    settings with a fixed +/-1. Exact integers; every one is +/-2, so any
    mixture of vertices has |S| <= 2 while the exact prediction reaches
    2*sqrt(2) in magnitude."""
    values = []
    for a1, a2, b1, b2 in product((1, -1), repeat=4):
        values.append(a1 * b1 - a1 * b2 + a2 * b1 + a2 * b2)
    return tuple(values)


# ---------------------------------------------------------------------------
# distribution distance

def total_variation(p: JointDistribution, q: JointDistribution) -> float:
    """Total variation distance, (1/2) * sum |p_i - q_i|."""
    return 0.5 * math.fsum(
        abs(x - y) for x, y in zip(p.probabilities, q.probabilities)
    )


# ---------------------------------------------------------------------------
# audit report plumbing

@dataclass(frozen=True)
class AuditCheck:
    """One audited property: passes exactly when metric <= threshold."""

    name: str
    metric: float
    threshold: float
    passed: bool
    detail: str = ""

    @classmethod
    def of(cls, name: str, metric: float, threshold: float, detail: str = "") -> "AuditCheck":
        return cls(
            name=name,
            metric=metric,
            threshold=threshold,
            passed=metric <= threshold,
            detail=detail,
        )


@dataclass(frozen=True)
class AuditReport:
    """A named bundle of checks; passes only when every check does."""

    title: str
    checks: tuple[AuditCheck, ...]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def as_dict(self) -> dict:
        return {
            "title": self.title,
            "passed": self.passed,
            "checks": [
                {
                    "name": check.name,
                    "passed": check.passed,
                    "metric": check.metric,
                    "threshold": check.threshold,
                    "detail": check.detail,
                }
                for check in self.checks
            ],
        }

    def render_text(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        lines = [f"audit {self.title}: {verdict}"]
        for check in self.checks:
            status = "PASS" if check.passed else "FAIL"
            line = (
                f"  [{status}] {check.name}: metric={check.metric:.3e}"
                f" threshold={check.threshold:.3e}"
            )
            if check.detail:
                line += f" ({check.detail})"
            lines.append(line)
        return "\n".join(lines)


def angle_grid(step_deg: float = 5.0) -> tuple[float, ...]:
    """Angles 0, step, 2*step, ... covering [0, 360) degrees."""
    if not step_deg > 0.0:
        raise ValidationError(f"grid step must be positive, got {step_deg!r}")
    grid = []
    value = 0.0
    while value < 360.0:
        grid.append(value)
        value += step_deg
    return tuple(grid)


# ---------------------------------------------------------------------------
# no-signaling audits

def no_signaling_check(
    model: Model,
    theta_grid_deg: Sequence[float],
    phi_grid_deg: Sequence[float],
    tol: float = PROB_ATOL,
) -> AuditReport:
    """Exact audit: neither side's marginal may move with the far setting.

    For every theta on the grid, particle 1's marginal is compared across
    all phi values (and symmetrically for particle 2). The metric is the
    worst absolute deviation found.
    """
    thetas = [normalize_angle(t) for t in theta_grid_deg]
    phis = [normalize_angle(p) for p in phi_grid_deg]
    if not thetas or not phis:
        raise ValidationError("both setting grids must be non-empty")

    first_up = {}
    second_up = {}
    for theta in thetas:
        for phi in phis:
            dist = model.exact_distribution(SettingPair(theta, phi))
            first_up[(theta, phi)] = dist.marginal_first(Outcome.UP)
            second_up[(theta, phi)] = dist.marginal_second(Outcome.UP)

    def worst_spread(values_by_far: Callable[[Angle], list[float]], near_grid) -> tuple[float, Angle | None]:
        worst, where = 0.0, None
        for near in near_grid:
            values = values_by_far(near)
            spread = max(values) - min(values)
            if spread > worst:
                worst, where = spread, near
        return worst, where

    first_worst, first_where = worst_spread(
        lambda theta: [first_up[(theta, phi)] for phi in phis], thetas
    )
    second_worst, second_where = worst_spread(
        lambda phi: [second_up[(theta, phi)] for theta in thetas], phis
    )

    checks = (
        AuditCheck.of(
            "first_marginal_ignores_phi",
            first_worst,
            tol,
            detail=f"worst spread at theta={first_where}" if first_where else
            f"{len(thetas)}x{len(phis)} grid",
        ),
        AuditCheck.of(
            "second_marginal_ignores_theta",
            second_worst,
            tol,
            detail=f"worst spread at phi={second_where}" if second_where else
            f"{len(thetas)}x{len(phis)} grid",
        ),
    )
    return AuditReport(title=f"no-signaling[{model.name}]", checks=checks)


def symmetric_marginal_check(
    model: Model,
    theta_grid_deg: Sequence[float],
    phi_grid_deg: Sequence[float],
    tol: float = PROB_ATOL,
) -> AuditReport:
    """Exact audit: are both single-side marginals 1/2 everywhere on the
    grid? Stricter than no-signaling; a skewed plan mixture can be
    signaling-free yet fail this."""
    worst, where = 0.0, None
    for t in theta_grid_deg:
        for p in phi_grid_deg:
            pair = SettingPair.from_degrees(t, p)
            dist = model.exact_distribution(pair)
            dev = max(
                abs(dist.marginal_first(Outcome.UP) - 0.5),
                abs(dist.marginal_second(Outcome.UP) - 0.5),
            )
            if dev > worst:
                worst, where = dev, pair
    check = AuditCheck.of(
        "both_marginals_are_half",
        worst,
        tol,
        detail=f"worst at {where}" if where else "",
    )
    return AuditReport(title=f"symmetric-marginals[{model.name}]", checks=(check,))


def _two_proportion_score(count1: int, n1: int, count2: int, n2: int) -> float:
    """z-score of the difference between two binomial proportions."""
    p1, p2 = count1 / n1, count2 / n2
    pooled = (count1 + count2) / (n1 + n2)
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    if se == 0.0:
        return 0.0 if p1 == p2 else math.inf
    return abs(p1 - p2) / se


def empirical_no_signaling_check(
    choices: Sequence[SettingChoice],
    counts,
    z: float = 5.0,
) -> AuditReport:
    """Statistical audit of recorded tallies: within each near-side
    setting, the near-side up-rate is compared across far-side settings
    with a two-proportion z-test. The metric is the worst z-score."""

    def side_check(name: str, near_key, up_count) -> AuditCheck:
        groups: dict = {}
        for k, choice in enumerate(choices):
            n_k = int(counts[k].sum())
            if n_k == 0:
                continue
            groups.setdefault(near_key(choice), []).append((up_count(counts[k]), n_k))
        worst = 0.0
        for cells in groups.values():
            for (c1, n1), (c2, n2) in combinations(cells, 2):
                worst = max(worst, _two_proportion_score(c1, n1, c2, n2))
        return AuditCheck.of(name, worst, z, detail=f"{len(groups)} near-side settings")

    first_up = lambda row: int(sum(
        c for c, o in zip(row, JOINT_OUTCOMES) if o.first is Outcome.UP
    ))
    second_up = lambda row: int(sum(
        c for c, o in zip(row, JOINT_OUTCOMES) if o.second is Outcome.UP
    ))
    checks = (
        side_check("first_up_rate_ignores_phi",
                   lambda ch: ch.pair.theta.degrees, first_up),
        side_check("second_up_rate_ignores_theta",
                   lambda ch: ch.pair.phi.degrees, second_up),
    )
    return AuditReport(title="no-signaling[empirical]", checks=checks)


# ---------------------------------------------------------------------------
# measurement-independence audit

def measurement_independence_audit(
    model: Model,
    pairs: Sequence[SettingPair],
    tol: float = PROB_ATOL,
) -> AuditReport:
    """Does the law of the per-pair hidden record depend on the settings?

    Compares the model's settings-indexed hidden-record law across all
    given setting pairs; the metric is the worst pairwise total variation
    distance. Zero (exactly) means the record's law never reacts to the
    choice of settings.
    """
    if len(pairs) < 2:
        raise ValidationError("need at least two setting pairs to compare")
    dists = [model.lambda_distribution(pair) for pair in pairs]
    worst, worst_pair = 0.0, None
    for i, j in combinations(range(len(pairs)), 2):
        tv = total_variation(dists[i], dists[j])
        if tv > worst:
            worst, worst_pair = tv, (pairs[i], pairs[j])
    detail = (
        f"worst between {worst_pair[0]} and {worst_pair[1]}"
        if worst_pair else f"{len(pairs)} setting pairs compared"
    )
    check = AuditCheck.of("hidden_law_setting_invariant", worst, tol, detail=detail)
    return AuditReport(title=f"measurement-independence[{model.name}]", checks=(check,))


# ---------------------------------------------------------------------------
# frequency agreement audits

def frequency_agreement(
    model: Model,
    policy: SettingPolicy,
    n: int,
    seed: int,
    target: Callable[[SettingChoice], JointDistribution],
    z: float = 5.0,
    floor_scale: float = 10.0,
    title: str = "frequency-agreement",
) -> AuditReport:
    """Run the model and compare per-setting outcome frequencies with a
    target distribution.

    Each outcome gets a band of z standard errors around the target
    probability; outcomes the target forbids or forces (p of 0 or 1) get
    a band of ``floor_scale / n`` instead, since the normal band
    degenerates there. The metric per setting is the worst band fraction,
    so 1.0 is the pass threshold.
    """
    counts = run_counts(model, policy, n, seed)
    checks = []
    for k, choice in enumerate(policy.choices):
        n_k = int(counts[k].sum())
        if n_k == 0:
            continue
        expected = target(choice)
        worst, worst_outcome = 0.0, JOINT_OUTCOMES[0]
        for outcome in JOINT_OUTCOMES:
            p = expected.prob(outcome)
            p_hat = int(counts[k][outcome.index]) / n_k
            if p in (0.0, 1.0):
                band = floor_scale / n_k
            else:
                band = z * math.sqrt(p * (1.0 - p) / n_k)
            score = abs(p_hat - p) / band
            if score > worst:
                worst, worst_outcome = score, outcome
        checks.append(
            AuditCheck.of(
                f"frequencies@{choice.pair}",
                worst,
                1.0,
                detail=f"worst outcome {worst_outcome.value}, n={n_k}",
            )
        )
    return AuditReport(title=f"{title}[{model.name}]", checks=tuple(checks))


def quantum_agreement(
    model: Model, policy: SettingPolicy, n: int, seed: int,
    z: float = 5.0, floor_scale: float = 10.0,
) -> AuditReport:
    """Frequency agreement against the exact spin-pair predictions."""
    return frequency_agreement(
        model, policy, n, seed,
        target=lambda choice: quantum_distribution(choice.pair),
        z=z, floor_scale=floor_scale, title="quantum-agreement",
    )


def self_consistency_check(
    model: Model, policy: SettingPolicy, n: int, seed: int,
    z: float = 5.0, floor_scale: float = 10.0,
) -> AuditReport:
    """Frequency agreement against the model's own closed form; failures
    here mean the sampler and the formulas disagree."""
    return frequency_agreement(
        model, policy, n, seed,
        target=lambda choice: model.exact_distribution(choice.pair, choice.labels),
        z=z, floor_scale=floor_scale, title="self-consistency",
    )


# ---------------------------------------------------------------------------
# opposite-spin sweep

@dataclass(frozen=True)
class CurvePoint:
    """One sweep point: empirical opposite-spin rate with its interval,
    next to the exact prediction and the instruction-set floor."""

    delta_deg: float
    n: int
    opposite_count: int
    p_opposite_emp: float
    ci_lo: float
    ci_hi: float
    p_opposite_qm: float
    mermin_floor: float


def opposite_spin_curve(
    model: Model, deltas_deg: Sequence[float], n_per_point: int, seed: int
) -> tuple[CurvePoint, ...]:
    """Sweep the setting difference and estimate P(opposite) per point.

    Each difference gets exactly ``n_per_point`` trials via round-robin
    scheduling. Duplicate differences stay separate points.
    """
    if n_per_point < 1:
        raise ValidationError(f"need at least one trial per point, got {n_per_point!r}")
    policy = DeltaScanPolicy(deltas_deg)
    counts = run_counts(model, policy, n_per_point * len(policy.choices), seed)
    points = []
    for k, delta in enumerate(policy.deltas_deg):
        n_k = int(counts[k].sum())
        opposite = int(sum(
            c for c, o in zip(counts[k], JOINT_OUTCOMES) if o.opposite_spins
        ))
        lo, hi = wilson_interval(opposite, n_k)
        points.append(
            CurvePoint(
                delta_deg=delta,
                n=n_k,
                opposite_count=opposite,
                p_opposite_emp=opposite / n_k,
                ci_lo=lo,
                ci_hi=hi,
                p_opposite_qm=opposite_spin_probability(
                    SettingPair.from_degrees(delta, 0.0)
                ),
                mermin_floor=float(OPPOSITE_SPIN_FLOOR),
            )
        )
    return tuple(points)


def curve_within_bands(
    points: Iterable[CurvePoint], z: float = 5.0, floor_scale: float = 10.0
) -> tuple[bool, ...]:
    """Per-point verdicts: is the empirical rate within z standard errors
    of the exact prediction (with the degenerate-p floor band)?"""
    verdicts = []
    for point in points:
        p = point.p_opposite_qm
        if p in (0.0, 1.0):
            band = floor_scale / point.n
        else:
            band = z * math.sqrt(p * (1.0 - p) / point.n)
        verdicts.append(abs(point.p_opposite_emp - p) <= band)
    return tuple(verdicts)


def write_curve_csv(path: str | os.PathLike, points: Iterable[CurvePoint]) -> None:
    """Write sweep points as CSV (one row per point, sweep order)."""
    with atomic_text_writer(path) as handle:
        handle.write("delta_deg,p_opposite_emp,ci_lo,ci_hi,p_opposite_qm,mermin_floor\n")
        for point in points:
            handle.write(
                f"{point.delta_deg!r},{point.p_opposite_emp!r},{point.ci_lo!r},"
                f"{point.ci_hi!r},{point.p_opposite_qm!r},{point.mermin_floor!r}\n"
            )
