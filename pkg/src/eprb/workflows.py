"""End-to-end operations shared by the command line and the HTTP service.

Each workflow takes a validated config, runs the requested computation
and returns a plain JSON-ready dict. File output only happens when the
config carries an ``out`` prefix, so the service can reuse the same
functions without ever touching the server's filesystem.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from typing import Optional

from .analysis import (
    CHSH_OPTIMAL_SETTINGS,
    ChshSettings,
    angle_grid,
    certify_mermin_bound,
    chsh_from_model,
    chsh_value,
    curve_within_bands,
    empirical_no_signaling_check,
    local_deterministic_chsh_values,
    measurement_independence_audit,
    no_signaling_check,
    opposite_spin_curve,
    quantum_agreement,
    self_consistency_check,
    symmetric_marginal_check,
    write_curve_csv,
)
from .config import (
    DEFAULT_SCAN_DELTAS,
    RunConfig,
    RunParams,
    build_binding,
    build_model,
    build_policy,
    parse_policy,
)
from .core import (
    JOINT_OUTCOMES,
    LABEL_PAIRS,
    LabelBinding,
    SettingPair,
    ValidationError,
)
from .engine import (
    DeltaScanPolicy,
    atomic_text_writer,
    estimate,
    run_counts,
    run_experiment,
    write_records_jsonl,
    write_summary_csv,
)
from .hvmodels import GrandmaModel, MerminModel, Model
from .quantum import correlation, quantum_distribution


def _write_json(path: str, payload: dict) -> None:
    with atomic_text_writer(path) as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def simulate_run(config: RunConfig) -> dict:
    """Run trials and summarize them; optionally write the trial records
    (JSON Lines) and the per-outcome summary (CSV)."""
    binding = build_binding(config.bind)
    model = build_model(config, binding)
    policy = build_policy(config, binding)
    records = run_experiment(model, policy, config.n, config.seed)
    empirical = estimate(records)
    lo, hi = empirical.opposite_spin_interval()
    result = {
        "model": model.name,
        "policy": policy.name,
        "n": config.n,
        "seed": config.seed,
        "counts": {o.value: empirical.count(o) for o in JOINT_OUTCOMES},
        "p_hat": {o.value: empirical.p_hat(o) for o in JOINT_OUTCOMES},
        "p_opposite": empirical.opposite_spin_rate,
        "p_opposite_ci": [lo, hi],
        "files": None,
    }
    if config.out:
        records_path = f"{config.out}.jsonl"
        summary_path = f"{config.out}.summary.csv"
        write_records_jsonl(records_path, records, model.name)
        write_summary_csv(summary_path, empirical)
        result["files"] = {"records": records_path, "summary": summary_path}
    return result


def certify_report(config: RunConfig) -> dict:
    """Exact certificates: the instruction-set opposite-spin floor by
    brute-force enumeration, and the four-correlation comparison."""
    binding = build_binding(config.bind)
    certificate = certify_mermin_bound(binding)
    vertices = local_deterministic_chsh_values()
    result = {
        "binding": {
            "a": binding.a.degrees,
            "b": binding.b.degrees,
            "c": binding.c.degrees,
        },
        "fractions": [str(f) for f in certificate.fractions],
        "floor": str(certificate.minimum),
        "ceiling": str(certificate.maximum),
        "floor_value": float(certificate.minimum),
        "quantum_average": certificate.quantum_average,
        "quantum_below_floor": certificate.quantum_below_floor,
        "chsh": {
            "settings_deg": {
                "a1": CHSH_OPTIMAL_SETTINGS.a1.degrees,
                "a2": CHSH_OPTIMAL_SETTINGS.a2.degrees,
                "b1": CHSH_OPTIMAL_SETTINGS.b1.degrees,
                "b2": CHSH_OPTIMAL_SETTINGS.b2.degrees,
            },
            "exact_value": chsh_value(CHSH_OPTIMAL_SETTINGS),
            "deterministic_values": sorted(set(vertices)),
            "deterministic_bound": float(max(abs(v) for v in vertices)),
        },
        "files": None,
    }
    if config.out:
        path = f"{config.out}.certificate.json"
        _write_json(path, {k: v for k, v in result.items() if k != "files"})
        result["files"] = {"certificate": path}
    return result


def _exact_grids(model: Model, binding: LabelBinding):
    """Angle grid and comparison pairs for the exact audits.

    Label-bound models can only be evaluated at bound angles; everything
    else gets a dense grid.
    """
    label_bound = isinstance(model, MerminModel) or (
        isinstance(model, GrandmaModel) and model.mode == GrandmaModel.LABELED
    )
    if label_bound:
        grid = (binding.a.degrees, binding.b.degrees, binding.c.degrees)
        pairs = [binding.pair_of(l1, l2) for l1, l2 in LABEL_PAIRS]
        return grid, pairs
    grid = angle_grid(15.0)
    coarse = angle_grid(45.0)
    pairs = [SettingPair.from_degrees(t, p) for t in coarse for p in coarse]
    return grid, pairs


def audit_battery(config: RunConfig) -> dict:
    """The full audit set: exact no-signaling and marginal checks, the
    measurement-independence comparison, and statistical agreement of a
    run with both the model's own closed form and the exact spin-pair
    predictions."""
    binding = build_binding(config.bind)
    model = build_model(config, binding)
    policy = build_policy(config, binding)
    grid, pairs = _exact_grids(model, binding)
    counts = run_counts(model, policy, config.n, config.seed)
    reports = [
        no_signaling_check(model, grid, grid),
        symmetric_marginal_check(model, grid, grid),
        measurement_independence_audit(model, pairs),
        empirical_no_signaling_check(policy.choices, counts),
        self_consistency_check(model, policy, config.n, config.seed),
        quantum_agreement(model, policy, config.n, config.seed),
    ]
    result = {
        "model": model.name,
        "passed": all(report.passed for report in reports),
        "reports": [report.as_dict() for report in reports],
        "files": None,
    }
    if config.out:
        path = f"{config.out}.audit.json"
        _write_json(path, {k: v for k, v in result.items() if k != "files"})
        result["files"] = {"audit": path}
    return result


def scan_curve(config: RunConfig) -> dict:
    """Sweep the setting difference and tabulate the opposite-spin rate
    against the exact prediction; ``n`` means trials per sweep point."""
    binding = build_binding(config.bind)
    model = build_model(config, binding)
    if config.policy is None:
        policy = DeltaScanPolicy(DEFAULT_SCAN_DELTAS)
    else:
        policy = parse_policy(config.policy, binding)
        if not isinstance(policy, DeltaScanPolicy):
            raise ValidationError("the scan command needs a 'scan:d1,d2,...' policy")
    points = opposite_spin_curve(model, policy.deltas_deg, config.n, config.seed)
    verdicts = curve_within_bands(points)
    result = {
        "model": model.name,
        "n_per_point": config.n,
        "seed": config.seed,
        "points": [asdict(point) for point in points],
        "within_bands": list(verdicts),
        "pass_fraction": sum(verdicts) / len(verdicts),
        "files": None,
    }
    if config.out:
        path = f"{config.out}.curve.csv"
        write_curve_csv(path, points)
        result["files"] = {"curve": path}
    return result


def distribution_report(theta_deg: float, phi_deg: float) -> dict:
    """Exact joint distribution and correlation at one setting pair."""
    pair = SettingPair.from_degrees(theta_deg, phi_deg)
    dist = quantum_distribution(pair)
    return {
        "theta_deg": pair.theta.degrees,
        "phi_deg": pair.phi.degrees,
        "probabilities": dist.as_dict(),
        "p_opposite": dist.opposite_spin_probability,
        "correlation": correlation(pair),
    }


def chsh_report(
    a1_deg: float,
    a2_deg: float,
    b1_deg: float,
    b2_deg: float,
    params: Optional[RunParams] = None,
) -> dict:
    """The four-correlation combination at the given settings: the exact
    value, and optionally a model's value computed from its closed-form
    distributions."""
    settings = ChshSettings.from_degrees(a1_deg, a2_deg, b1_deg, b2_deg)
    result = {
        "settings_deg": {
            "a1": settings.a1.degrees,
            "a2": settings.a2.degrees,
            "b1": settings.b1.degrees,
            "b2": settings.b2.degrees,
        },
        "exact_value": chsh_value(settings),
        "deterministic_bound": float(
            max(abs(v) for v in local_deterministic_chsh_values())
        ),
        "model": None,
        "model_value": None,
    }
    if params is not None:
        binding = build_binding(params.bind)
        model = build_model(params, binding)
        result["model"] = model.name
        result["model_value"] = chsh_from_model(model, settings)
    return result
