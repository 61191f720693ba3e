"""Bound certification, four-correlation combination, audits, sweeps."""

import math
from fractions import Fraction

import numpy as np
import pytest

from eprb.analysis import (
    CHSH_OPTIMAL_SETTINGS,
    OPPOSITE_SPIN_FLOOR,
    AuditCheck,
    AuditReport,
    ChshSettings,
    angle_grid,
    certify_mermin_bound,
    chsh_from_model,
    chsh_value,
    curve_within_bands,
    distribution_correlation,
    empirical_no_signaling_check,
    local_deterministic_chsh_values,
    measurement_independence_audit,
    no_signaling_check,
    opposite_spin_curve,
    quantum_agreement,
    self_consistency_check,
    symmetric_marginal_check,
    total_variation,
    write_curve_csv,
)
from eprb.core import (
    DEFAULT_BINDING,
    LABEL_PAIRS,
    LABELS,
    JointDistribution,
    LabelBinding,
    SettingPair,
    ValidationError,
)
from eprb.engine import UniformLabelPairsPolicy, wilson_interval
from eprb.hvmodels import GrandmaModel, MerminModel, QuantumModel
from eprb.quantum import quantum_distribution

BINDING_GRID = (0.0, 120.0, 240.0)


def test_certificate_enumerates_exact_fractions():
    cert = certify_mermin_bound()
    assert len(cert.fractions) == 8
    assert cert.fractions.count(Fraction(1)) == 2
    assert cert.fractions.count(Fraction(1, 3)) == 6
    assert cert.minimum == OPPOSITE_SPIN_FLOOR == Fraction(1, 3)
    assert cert.maximum == Fraction(1)
    assert cert.quantum_average == pytest.approx(0.25, abs=1e-12)
    assert cert.quantum_below_floor


def test_certificate_quantum_average_follows_the_binding():
    # with settings 90 degrees apart the averaged prediction lands exactly
    # on the floor, so the strict comparison no longer separates them
    cert = certify_mermin_bound(LabelBinding.from_degrees(0.0, 90.0, 180.0))
    assert cert.minimum == Fraction(1, 3)
    assert cert.quantum_average == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert not cert.quantum_below_floor


def test_chsh_settings_pair_order():
    settings = ChshSettings.from_degrees(0.0, 90.0, 45.0, 135.0)
    assert settings.pairs == (
        SettingPair.from_degrees(0.0, 45.0),
        SettingPair.from_degrees(0.0, 135.0),
        SettingPair.from_degrees(90.0, 45.0),
        SettingPair.from_degrees(90.0, 135.0),
    )


def test_chsh_value_at_the_optimal_geometry():
    assert chsh_value(CHSH_OPTIMAL_SETTINGS) == pytest.approx(-math.sqrt(8.0), abs=1e-9)
    assert abs(chsh_value(CHSH_OPTIMAL_SETTINGS)) > 2.0


def test_chsh_value_degenerate_and_custom_correlation():
    collapsed = ChshSettings.from_degrees(0.0, 0.0, 0.0, 0.0)
    assert chsh_value(collapsed) == pytest.approx(-2.0, abs=1e-12)
    assert chsh_value(collapsed, correlation_fn=lambda pair: 1.0) == 2.0


def test_deterministic_strategies_all_sit_on_the_boundary():
    values = local_deterministic_chsh_values()
    assert len(values) == 16
    assert all(abs(v) == 2 for v in values)
    assert set(values) == {-2, 2}


def test_vertex_mixtures_never_exceed_two():
    values = np.array(local_deterministic_chsh_values(), dtype=float)
    rng = np.random.default_rng(99)
    for weights in rng.dirichlet(np.ones(16), size=200):
        assert abs(float(weights @ values)) <= 2.0 + 1e-9


def test_chsh_from_models():
    assert chsh_from_model(QuantumModel(), CHSH_OPTIMAL_SETTINGS) == pytest.approx(
        chsh_value(CHSH_OPTIMAL_SETTINGS), abs=1e-12
    )
    bound = ChshSettings.from_degrees(0.0, 120.0, 0.0, 240.0)
    assert chsh_from_model(GrandmaModel(), bound) == pytest.approx(
        chsh_value(bound), abs=1e-12
    )
    mermin_s = chsh_from_model(MerminModel(), bound)
    assert mermin_s == pytest.approx(-1.0, abs=1e-12)
    assert abs(mermin_s) <= 2.0


def test_distribution_correlation():
    assert distribution_correlation(JointDistribution((0.0, 0.0, 0.5, 0.5))) == -1.0
    assert distribution_correlation(JointDistribution((0.25,) * 4)) == 0.0
    assert distribution_correlation(JointDistribution((0.5, 0.5, 0.0, 0.0))) == 1.0


def test_total_variation():
    flat = JointDistribution((0.25,) * 4)
    anti = JointDistribution((0.0, 0.0, 0.5, 0.5))
    assert total_variation(flat, flat) == 0.0
    assert total_variation(flat, anti) == pytest.approx(0.5, abs=1e-12)
    assert total_variation(anti, flat) == total_variation(flat, anti)
    assert total_variation(anti, JointDistribution((0.5, 0.5, 0.0, 0.0))) == 1.0


def test_audit_check_boundary_semantics():
    assert AuditCheck.of("x", 1.0, 1.0).passed
    assert not AuditCheck.of("x", 1.0 + 1e-15, 1.0).passed
    report = AuditReport("demo", (
        AuditCheck.of("ok", 0.0, 1.0),
        AuditCheck.of("bad", 2.0, 1.0, detail="why"),
    ))
    assert not report.passed
    payload = report.as_dict()
    assert payload["title"] == "demo"
    assert payload["passed"] is False
    assert [c["name"] for c in payload["checks"]] == ["ok", "bad"]
    assert payload["checks"][1]["detail"] == "why"
    text = report.render_text()
    assert "audit demo: FAIL" in text
    assert "[PASS] ok" in text and "[FAIL] bad" in text


def test_angle_grid():
    assert angle_grid(90.0) == (0.0, 90.0, 180.0, 270.0)
    assert len(angle_grid()) == 72
    with pytest.raises(ValidationError):
        angle_grid(0.0)


@pytest.mark.parametrize("model", [QuantumModel(), GrandmaModel(mode="continuous")])
def test_no_signaling_exact_for_difference_only_models(model):
    grid = angle_grid(15.0)
    report = no_signaling_check(model, grid, grid)
    assert report.passed
    for check in report.checks:
        assert check.metric <= 1e-12
    marginals = symmetric_marginal_check(model, grid, grid)
    assert marginals.passed
    assert marginals.checks[0].metric <= 1e-12


def test_no_signaling_exact_for_uniform_instruction_sets():
    report = no_signaling_check(MerminModel(), BINDING_GRID, BINDING_GRID)
    assert report.passed
    assert all(check.metric == 0.0 for check in report.checks)
    assert symmetric_marginal_check(MerminModel(), BINDING_GRID, BINDING_GRID).passed


def test_skewed_plan_mixture_is_signaling_free_but_asymmetric():
    # deterministic plans answer from their own side only, so no-signaling
    # holds with exact zeros even though the marginals are far from 1/2
    weights = [0.0] * 8
    weights[2] = 1.0
    model = MerminModel(weights=weights)
    signaling = no_signaling_check(model, BINDING_GRID, BINDING_GRID)
    assert signaling.passed
    assert all(check.metric == 0.0 for check in signaling.checks)
    marginals = symmetric_marginal_check(model, BINDING_GRID, BINDING_GRID)
    assert not marginals.passed
    assert marginals.checks[0].metric == 0.5


def test_no_signaling_check_validation():
    with pytest.raises(ValidationError):
        no_signaling_check(QuantumModel(), [], [0.0])


def test_measurement_independence_mermin_is_exactly_invariant():
    pairs = [DEFAULT_BINDING.pair_of(l1, l2) for l1, l2 in LABEL_PAIRS]
    report = measurement_independence_audit(MerminModel(), pairs)
    assert report.passed
    assert report.checks[0].metric == 0.0


def test_measurement_independence_grandma_fails_with_tv_half():
    pairs = [SettingPair.from_degrees(0.0, 0.0), SettingPair.from_degrees(0.0, 90.0)]
    report = measurement_independence_audit(GrandmaModel(mode="continuous"), pairs)
    assert not report.passed
    assert report.checks[0].metric == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValidationError):
        measurement_independence_audit(GrandmaModel(), pairs[:1])


def test_empirical_no_signaling_passes_on_a_real_run():
    policy = UniformLabelPairsPolicy()
    from eprb.engine import run_counts

    counts = run_counts(GrandmaModel(), policy, 20000, seed=2026)
    report = empirical_no_signaling_check(policy.choices, counts)
    assert report.passed
    assert [c.name for c in report.checks] == [
        "first_up_rate_ignores_phi",
        "second_up_rate_ignores_theta",
    ]


def test_empirical_no_signaling_flags_synthetic_signaling():
    policy = UniformLabelPairsPolicy()
    counts = np.zeros((9, 4), dtype=np.int64)
    counts[0] = (0, 0, 1000, 0)  # (a, a): near side always up
    counts[1] = (0, 1000, 0, 0)  # (a, b): near side always down
    report = empirical_no_signaling_check(policy.choices, counts)
    assert not report.passed
    assert not report.checks[0].passed
    assert report.checks[1].passed


def test_quantum_agreement_separates_the_models():
    policy = UniformLabelPairsPolicy()
    good = quantum_agreement(GrandmaModel(), policy, 20000, seed=11)
    assert good.passed
    bad = quantum_agreement(MerminModel(), policy, 20000, seed=11)
    assert not bad.passed
    verdicts = {check.name: check.passed for check in bad.checks}
    # equal-label frequencies agree; the six unequal ones are the clash
    equal_names = [f"frequencies@{DEFAULT_BINDING.pair_of(l, l)}" for l in LABELS]
    assert all(verdicts[name] for name in equal_names)
    assert sum(1 for ok in verdicts.values() if not ok) == 6


@pytest.mark.parametrize("model", [MerminModel(), GrandmaModel(), QuantumModel()])
def test_self_consistency_passes_for_every_model(model):
    report = self_consistency_check(model, UniformLabelPairsPolicy(), 20000, seed=3)
    assert report.passed


def test_opposite_spin_curve_points():
    points = opposite_spin_curve(QuantumModel(), [0.0, 90.0, 120.0, 90.0],
                                 n_per_point=400, seed=5)
    assert [p.delta_deg for p in points] == [0.0, 90.0, 120.0, 90.0]
    assert all(p.n == 400 for p in points)
    assert points[0].p_opposite_emp == 1.0  # exact at equal settings
    assert points[0].p_opposite_qm == 1.0
    assert points[2].p_opposite_qm == pytest.approx(0.25, abs=1e-12)
    for p in points:
        assert (p.ci_lo, p.ci_hi) == wilson_interval(p.opposite_count, p.n)
        assert p.mermin_floor == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert all(curve_within_bands(points))
    with pytest.raises(ValidationError):
        opposite_spin_curve(QuantumModel(), [0.0], 0, seed=5)


def test_curve_within_bands_degenerate_prediction():
    from eprb.analysis import CurvePoint

    def point(emp, qm, n=1000):
        count = round(emp * n)
        lo, hi = wilson_interval(count, n)
        return CurvePoint(0.0, n, count, emp, lo, hi, qm, 1.0 / 3.0)

    assert curve_within_bands([point(1.0, 1.0)]) == (True,)
    assert curve_within_bands([point(0.99, 1.0)]) == (False,)
    assert curve_within_bands([point(0.5, 0.5)]) == (True,)
    assert curve_within_bands([point(0.4, 0.5)]) == (False,)


def test_write_curve_csv(tmp_path):
    points = opposite_spin_curve(GrandmaModel(mode="continuous"),
                                 [0.0, 120.0], n_per_point=100, seed=1)
    path = tmp_path / "curve.csv"
    write_curve_csv(path, points)
    lines = path.read_text().splitlines()
    assert lines[0] == "delta_deg,p_opposite_emp,ci_lo,ci_hi,p_opposite_qm,mermin_floor"
    assert len(lines) == 3
    first = lines[1].split(",")
    assert float(first[0]) == 0.0
    assert float(first[1]) == points[0].p_opposite_emp
    assert float(first[4]) == points[0].p_opposite_qm
