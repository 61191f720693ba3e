"""Validated run settings and the builders that turn them into objects.

The same schema backs the command line (flags over a JSON config file)
and the HTTP service (request bodies), so a run is described the same
way everywhere. Unknown keys are rejected rather than ignored.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from .core import (
    DEFAULT_BINDING,
    LabelBinding,
    SettingPair,
    ValidationError,
)
from .engine import (
    DeltaScanPolicy,
    FixedPairPolicy,
    IndependentUniformLabelsPolicy,
    SettingPolicy,
    UniformLabelPairsPolicy,
)
from .hvmodels import GrandmaModel, MerminModel, Model, QuantumModel

MODEL_IDS = ("mermin", "grandma", "quantum")

#: Stock sweep for the scan command: every 30 degrees around the circle.
DEFAULT_SCAN_DELTAS = tuple(float(d) for d in range(0, 360, 30))


class RunParams(BaseModel):
    """Knobs for one run. ``policy`` stays None until resolved, so each
    command can pick its own default."""

    model_config = ConfigDict(extra="forbid")

    model: str = "quantum"
    policy: Optional[str] = None
    n: int = Field(default=10000, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    bind: Optional[str] = None
    weights: Optional[list[float]] = None
    grandma_mode: Literal["labeled", "continuous"] = "labeled"


class RunConfig(RunParams):
    """RunParams plus the local-output prefix used by the command line."""

    out: Optional[str] = None


def parse_bind(text: str) -> LabelBinding:
    """Parse a binding string like 'a=0,b=120,c=240' (keys in any order,
    all three required)."""
    values: dict[str, float] = {}
    for part in text.split(","):
        key, sep, raw = part.partition("=")
        key = key.strip()
        if not sep or key not in ("a", "b", "c"):
            raise ValidationError(
                f"bad binding component {part.strip()!r}; expected a=DEG,b=DEG,c=DEG"
            )
        if key in values:
            raise ValidationError(f"label {key!r} bound twice")
        try:
            values[key] = float(raw.strip())
        except ValueError:
            raise ValidationError(f"bad angle {raw.strip()!r} for label {key!r}") from None
    if set(values) != {"a", "b", "c"}:
        missing = sorted({"a", "b", "c"} - set(values))
        raise ValidationError(f"binding is missing labels: {', '.join(missing)}")
    return LabelBinding.from_degrees(values["a"], values["b"], values["c"])


def build_binding(bind: Optional[str]) -> LabelBinding:
    return DEFAULT_BINDING if bind is None else parse_bind(bind)


def parse_policy(text: str, binding: LabelBinding) -> SettingPolicy:
    """Parse a policy string.

    Accepted forms: 'labels', 'labels-independent',
    'fixed:<theta_deg>,<phi_deg>' and 'scan:<d1>,<d2>,...'.
    """
    head, sep, tail = text.partition(":")
    head = head.strip()
    if head == "labels" and not sep:
        return UniformLabelPairsPolicy(binding)
    if head == "labels-independent" and not sep:
        return IndependentUniformLabelsPolicy(binding)
    if head == "fixed" and sep:
        parts = [p.strip() for p in tail.split(",")]
        if len(parts) != 2:
            raise ValidationError("fixed policy needs 'fixed:<theta_deg>,<phi_deg>'")
        try:
            theta, phi = float(parts[0]), float(parts[1])
        except ValueError:
            raise ValidationError(f"bad fixed-policy angles {tail!r}") from None
        return FixedPairPolicy(SettingPair.from_degrees(theta, phi))
    if head == "scan" and sep:
        parts = [p.strip() for p in tail.split(",") if p.strip()]
        if not parts:
            raise ValidationError("scan policy needs 'scan:<d1>,<d2>,...'")
        try:
            deltas = [float(p) for p in parts]
        except ValueError:
            raise ValidationError(f"bad scan differences {tail!r}") from None
        return DeltaScanPolicy(deltas)
    raise ValidationError(
        f"unknown policy {text!r}; expected 'labels', 'labels-independent', "
        f"'fixed:T,P' or 'scan:d1,d2,...'"
    )


def build_policy(
    params: RunParams, binding: LabelBinding, default: str = "labels"
) -> SettingPolicy:
    text = params.policy if params.policy is not None else default
    return parse_policy(text, binding)


def build_model(params: RunParams, binding: LabelBinding) -> Model:
    if params.model == "mermin":
        return MerminModel(weights=params.weights, binding=binding)
    if params.weights is not None:
        raise ValidationError("plan weights only apply to the mermin model")
    if params.model == "grandma":
        return GrandmaModel(mode=params.grandma_mode, binding=binding)
    if params.model == "quantum":
        return QuantumModel()
    raise ValidationError(
        f"unknown model {params.model!r}; expected one of {', '.join(MODEL_IDS)}"
    )
