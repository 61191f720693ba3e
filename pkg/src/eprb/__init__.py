"""Simulator and audit toolkit for the two-particle spin-correlation
experiment: exact predictions, two hidden-variable models behind one
contract, a reproducible trial engine, and certification tooling.
"""

from .core import (
    DEFAULT_BINDING,
    JOINT_OUTCOMES,
    LABEL_PAIRS,
    LABELS,
    Angle,
    DomainMismatchError,
    EprbError,
    JointDistribution,
    JointOutcome,
    LabelBinding,
    NoDataError,
    Outcome,
    SettingLabel,
    SettingPair,
    ValidationError,
    normalize_angle,
)
from .quantum import (
    correlation,
    joint_probability,
    opposite_spin_probability,
    quantum_distribution,
    singlet_amplitudes,
)
from .hvmodels import (
    INSTRUCTION_SETS,
    GrandmaModel,
    InstructionSet,
    MerminModel,
    Model,
    QuantumModel,
    enumerate_instruction_sets,
)
from .engine import (
    DeltaScanPolicy,
    EmpiricalDistribution,
    FixedPairPolicy,
    IndependentUniformLabelsPolicy,
    RunRecord,
    SettingPolicy,
    UniformLabelPairsPolicy,
    derive_seed,
    estimate,
    run_counts,
    run_experiment,
)
from .analysis import (
    CHSH_OPTIMAL_SETTINGS,
    OPPOSITE_SPIN_FLOOR,
    ChshSettings,
    certify_mermin_bound,
    chsh_from_model,
    chsh_value,
    local_deterministic_chsh_values,
    measurement_independence_audit,
    no_signaling_check,
    opposite_spin_curve,
    quantum_agreement,
    total_variation,
)

__version__ = "0.1.0"
