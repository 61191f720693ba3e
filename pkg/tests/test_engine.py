"""Run engine: policies, streams, tallies, intervals, file formats."""

import json
import os

import numpy as np
import pytest

import eprb.engine as engine
from eprb.core import (
    DEFAULT_BINDING,
    JOINT_OUTCOMES,
    LABEL_PAIRS,
    JointOutcome,
    NoDataError,
    SettingLabel,
    SettingPair,
    ValidationError,
)
from eprb.engine import (
    DeltaScanPolicy,
    EmpiricalDistribution,
    FixedPairPolicy,
    IndependentUniformLabelsPolicy,
    UniformLabelPairsPolicy,
    atomic_text_writer,
    derive_seed,
    estimate,
    record_json_dict,
    run_counts,
    run_experiment,
    wilson_interval,
    write_records_jsonl,
    write_summary_csv,
)
from eprb.hvmodels import GrandmaModel, MerminModel, QuantumModel

A, B, C = SettingLabel.A, SettingLabel.B, SettingLabel.C


def test_fixed_pair_policy():
    pair = SettingPair.from_degrees(10.0, 40.0)
    policy = FixedPairPolicy(pair)
    assert policy.draws == 0
    assert len(policy.choices) == 1
    assert policy.choices[0].pair == pair
    assert policy.choices[0].labels is None
    assert policy.choice_index(17, []) == 0
    assert policy.batch_choice_indices(np.arange(5), np.zeros((5, 0))).tolist() == [0] * 5


def test_uniform_label_pairs_policy():
    policy = UniformLabelPairsPolicy()
    assert policy.draws == 1
    assert len(policy.choices) == 9
    for choice, (l1, l2) in zip(policy.choices, LABEL_PAIRS):
        assert choice.labels == (l1, l2)
        assert choice.pair == DEFAULT_BINDING.pair_of(l1, l2)
    assert policy.choice_index(0, [0.0]) == 0
    assert policy.choice_index(0, [0.12]) == 1
    assert policy.choice_index(0, [0.999999]) == 8


def test_independent_uniform_labels_policy():
    policy = IndependentUniformLabelsPolicy()
    assert policy.draws == 2
    assert [c.labels for c in policy.choices] == list(LABEL_PAIRS)
    assert policy.choice_index(0, [0.0, 0.0]) == 0
    assert policy.choice_index(0, [0.4, 0.7]) == 5  # (b, c)
    assert policy.choice_index(0, [0.99, 0.99]) == 8


@pytest.mark.parametrize("policy", [
    UniformLabelPairsPolicy(),
    IndependentUniformLabelsPolicy(),
])
def test_label_policies_batch_matches_scalar(policy):
    rng = np.random.default_rng(11)
    u = rng.random((500, policy.draws))
    trials = np.arange(500)
    batch = policy.batch_choice_indices(trials, u)
    assert batch.tolist() == [policy.choice_index(t, u[t]) for t in trials]


def test_delta_scan_policy_round_robin():
    policy = DeltaScanPolicy([0.0, 90.0, 240.0])
    assert policy.draws == 0
    assert [c.pair for c in policy.choices] == [
        SettingPair.from_degrees(0.0, 0.0),
        SettingPair.from_degrees(90.0, 0.0),
        SettingPair.from_degrees(240.0, 0.0),
    ]
    assert [policy.choice_index(t, []) for t in range(7)] == [0, 1, 2, 0, 1, 2, 0]
    batch = policy.batch_choice_indices(np.arange(7), np.zeros((7, 0)))
    assert batch.tolist() == [0, 1, 2, 0, 1, 2, 0]


def test_delta_scan_policy_keeps_duplicate_slots():
    policy = DeltaScanPolicy([30.0, 30.0])
    assert len(policy.choices) == 2
    assert policy.choice_index(0, []) == 0
    assert policy.choice_index(1, []) == 1


def test_delta_scan_policy_validation():
    with pytest.raises(ValidationError):
        DeltaScanPolicy([])
    with pytest.raises(ValidationError):
        DeltaScanPolicy([0.0, float("nan")])


def test_derive_seed_frozen_values():
    assert derive_seed(0, 0) == 8668861027912758289
    assert derive_seed(0, 1) == 4881901421217228719
    assert derive_seed(123, 7) == 9942283658580680595


def test_derive_seed_is_pure_and_validated():
    assert derive_seed(99, 3) == derive_seed(99, 3)
    assert derive_seed(99, 3) != derive_seed(99, 4)
    with pytest.raises(ValidationError):
        derive_seed(-1, 0)
    with pytest.raises(ValidationError):
        derive_seed(0, -1)
    with pytest.raises(ValidationError):
        derive_seed(2**64, 0)


def test_run_parameter_validation():
    model, policy = QuantumModel(), FixedPairPolicy(SettingPair.from_degrees(0, 0))
    with pytest.raises(ValidationError):
        run_experiment(model, policy, -1, 0)
    with pytest.raises(ValidationError):
        run_experiment(model, policy, 2.0, 0)
    with pytest.raises(ValidationError):
        run_experiment(model, policy, True, 0)
    with pytest.raises(ValidationError):
        run_experiment(model, policy, 10, -3)
    with pytest.raises(ValidationError):
        run_counts(model, policy, 10, 2**64)


def test_run_experiment_is_reproducible_and_numbered():
    model = GrandmaModel()
    policy = UniformLabelPairsPolicy()
    first = run_experiment(model, policy, 50, seed=5)
    second = run_experiment(model, policy, 50, seed=5)
    assert first == second
    assert [r.trial for r in first] == list(range(50))
    other_seed = run_experiment(model, policy, 50, seed=6)
    assert other_seed != first


def test_run_experiment_validates_policy_against_model():
    # a scan through unbound angles cannot be served by a label-table model
    with pytest.raises(ValidationError):
        run_experiment(GrandmaModel(), DeltaScanPolicy([15.0]), 1, 0)


def test_random_access_matches_sequential():
    model = MerminModel()
    policy = UniformLabelPairsPolicy()
    sequential = run_experiment(model, policy, 40, seed=9)
    rng = np.random.default_rng(0)
    order = rng.permutation(40)
    permuted = run_experiment(model, policy, 40, seed=9, trial_indices=order)
    assert {r.trial: r for r in permuted} == {r.trial: r for r in sequential}
    subset = run_experiment(model, policy, 40, seed=9, trial_indices=[7, 3, 7])
    assert subset == [sequential[7], sequential[3], sequential[7]]
    with pytest.raises(ValidationError):
        run_experiment(model, policy, 40, seed=9, trial_indices=[40])


@pytest.mark.parametrize("model,policy", [
    (MerminModel(), UniformLabelPairsPolicy()),
    (MerminModel(weights=[0.5, 0.0, 0.125, 0.0, 0.125, 0.0, 0.25, 0.0]),
     IndependentUniformLabelsPolicy()),
    (GrandmaModel(), UniformLabelPairsPolicy()),
    (GrandmaModel(), IndependentUniformLabelsPolicy()),
    (GrandmaModel(mode="continuous"), DeltaScanPolicy([0.0, 33.0, 120.0])),
    (QuantumModel(), FixedPairPolicy(SettingPair.from_degrees(0.0, 90.0))),
])
def test_run_counts_matches_run_experiment(model, policy):
    n, seed = 2000, 7
    counts = run_counts(model, policy, n, seed)
    records = run_experiment(model, policy, n, seed)
    slot = {(c.pair, c.labels): k for k, c in enumerate(policy.choices)}
    expected = np.zeros((len(policy.choices), 4), dtype=np.int64)
    for record in records:
        expected[slot[(record.pair, record.labels)], record.outcome.index] += 1
    assert (counts == expected).all()
    assert counts.sum() == n


def test_run_counts_is_chunk_size_invariant(monkeypatch):
    model, policy = GrandmaModel(), UniformLabelPairsPolicy()
    whole = run_counts(model, policy, 500, seed=3)
    monkeypatch.setattr(engine, "_CHUNK_TRIALS", 7)
    pieces = run_counts(model, policy, 500, seed=3)
    assert (whole == pieces).all()


def test_estimate_filters_records():
    model = GrandmaModel()
    policy = UniformLabelPairsPolicy()
    records = run_experiment(model, policy, 300, seed=1)
    pair = DEFAULT_BINDING.pair_of(A, B)
    by_pair = estimate(records, pair=pair)
    by_labels = estimate(records, labels=(A, B))
    assert by_pair.counts == by_labels.counts
    assert by_pair.n == sum(1 for r in records if r.labels == (A, B))
    assert estimate(records).n == 300
    with pytest.raises(NoDataError):
        estimate(records, pair=SettingPair.from_degrees(5.0, 5.0))
    with pytest.raises(NoDataError):
        estimate([])


def test_empirical_distribution_accessors():
    emp = EmpiricalDistribution.from_counts(np.array([3, 1, 4, 2], dtype=np.int64))
    assert emp.n == 10
    assert all(isinstance(c, int) for c in emp.counts)
    assert emp.count(JointOutcome.UP_UP) == 3
    assert emp.p_hat(JointOutcome.DOWN_UP) == 0.2
    assert emp.opposite_spin_count == 6
    assert emp.opposite_spin_rate == 0.6
    assert emp.interval(JointOutcome.DOWN_DOWN) == wilson_interval(1, 10)
    assert emp.opposite_spin_interval() == wilson_interval(6, 10)


def test_empirical_distribution_validation():
    with pytest.raises(ValidationError):
        EmpiricalDistribution((1, 2, 3))
    with pytest.raises(ValidationError):
        EmpiricalDistribution((1, -1, 0, 0))
    with pytest.raises(NoDataError):
        EmpiricalDistribution((0, 0, 0, 0))


def test_wilson_interval_frozen_values():
    assert wilson_interval(5, 10) == pytest.approx(
        (0.236593090512564, 0.7634069094874361), abs=1e-12)
    assert wilson_interval(0, 20) == pytest.approx(
        (0.0, 0.16112515805281938), abs=1e-12)
    assert wilson_interval(20, 20) == pytest.approx(
        (0.8388748419471806, 1.0), abs=1e-12)
    assert wilson_interval(75, 100) == pytest.approx(
        (0.656955364519384, 0.8245478863771232), abs=1e-12)


def test_wilson_interval_shape_and_validation():
    lo, hi = wilson_interval(1, 1000)
    assert 0.0 <= lo < 0.001 < hi <= 1.0
    assert wilson_interval(3, 10, z=0.0) == (0.3, 0.3)
    with pytest.raises(NoDataError):
        wilson_interval(0, 0)
    with pytest.raises(ValidationError):
        wilson_interval(11, 10)
    with pytest.raises(ValidationError):
        wilson_interval(-1, 10)


def test_record_json_field_order():
    records = run_experiment(QuantumModel(),
                             FixedPairPolicy(SettingPair.from_degrees(30.0, 0.0)),
                             1, seed=0)
    payload = record_json_dict(records[0], "quantum")
    assert list(payload) == ["trial", "theta_deg", "phi_deg", "a", "b", "model", "hidden"]
    assert payload["trial"] == 0
    assert payload["theta_deg"] == 30.0
    assert payload["phi_deg"] == 0.0
    assert payload["a"] in ("+", "-") and payload["b"] in ("+", "-")
    assert payload["model"] == "quantum"
    assert payload["hidden"] is None


def test_jsonl_round_trip_is_byte_identical(tmp_path):
    model = GrandmaModel()
    policy = UniformLabelPairsPolicy()
    records = run_experiment(model, policy, 25, seed=4)
    path = tmp_path / "run.jsonl"
    write_records_jsonl(path, records, model.name)
    first_bytes = path.read_bytes()
    assert first_bytes.endswith(b"\n")
    lines = first_bytes.decode("utf-8").splitlines()
    assert len(lines) == 25
    parsed = json.loads(lines[3])
    assert parsed["trial"] == 3
    assert parsed["model"] == "grandma"
    assert parsed["hidden"] in [o.value for o in JOINT_OUTCOMES]
    write_records_jsonl(path, run_experiment(model, policy, 25, seed=4), model.name)
    assert path.read_bytes() == first_bytes


def test_summary_csv_format(tmp_path):
    emp = EmpiricalDistribution((3, 1, 4, 2))
    path = tmp_path / "summary.csv"
    write_summary_csv(path, emp)
    lines = path.read_text().splitlines()
    assert lines[0] == "outcome,count,p_hat,ci_lo,ci_hi"
    assert len(lines) == 5
    for line, outcome in zip(lines[1:], JOINT_OUTCOMES):
        name, count, p_hat, lo, hi = line.split(",")
        assert name == outcome.value
        assert int(count) == emp.count(outcome)
        assert float(p_hat) == emp.p_hat(outcome)
        assert (float(lo), float(hi)) == emp.interval(outcome)


def test_atomic_writer_success_and_failure(tmp_path):
    target = tmp_path / "out.txt"
    with atomic_text_writer(target) as handle:
        handle.write("complete\n")
    assert target.read_text() == "complete\n"
    with pytest.raises(RuntimeError):
        with atomic_text_writer(target) as handle:
            handle.write("partial")
            raise RuntimeError("boom")
    assert target.read_text() == "complete\n"
    fresh = tmp_path / "never.txt"
    with pytest.raises(RuntimeError):
        with atomic_text_writer(fresh) as handle:
            handle.write("partial")
            raise RuntimeError("boom")
    assert not fresh.exists()
    assert os.listdir(tmp_path) == ["out.txt"]
