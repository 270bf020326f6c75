"""Risk tiers, control kinds, and the gateway configuration surface.

A risk tier names the minimum set of controls the gateway must run; the
three levels are nested, so any configuration valid for a tier also
satisfies every tier below it. Startup refuses to serve when required
controls are not configured.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..errors import MrmError
from ..types import DecodingParams, EndpointSpec


class ControlKind(str, enum.Enum):
    USER_CONTROL = "user_control"
    USAGE_CONTROL = "usage_control"
    INPUT_CONTROL = "input_control"
    OUTPUT_CONTROL = "output_control"
    TERMS_OF_USE = "terms_of_use"
    HUMAN_IN_LOOP = "human_in_loop"


class TierLevel(str, enum.Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


TIER_ORDER = {TierLevel.LOW: 0, TierLevel.MEDIUM: 1, TierLevel.HIGH: 2}

DEFAULT_TIER_CONTROLS: dict[TierLevel, frozenset[ControlKind]] = {
    TierLevel.LOW: frozenset(
        {ControlKind.USER_CONTROL, ControlKind.USAGE_CONTROL, ControlKind.TERMS_OF_USE}
    ),
    TierLevel.MEDIUM: frozenset(
        {
            ControlKind.USER_CONTROL,
            ControlKind.USAGE_CONTROL,
            ControlKind.TERMS_OF_USE,
            ControlKind.INPUT_CONTROL,
            ControlKind.OUTPUT_CONTROL,
        }
    ),
    TierLevel.HIGH: frozenset(
        {
            ControlKind.USER_CONTROL,
            ControlKind.USAGE_CONTROL,
            ControlKind.TERMS_OF_USE,
            ControlKind.INPUT_CONTROL,
            ControlKind.OUTPUT_CONTROL,
            ControlKind.HUMAN_IN_LOOP,
        }
    ),
}


class ControlsMissing(MrmError):
    def __init__(self, missing: list[ControlKind]):
        super().__init__(f"required controls not configured: {[m.value for m in missing]}")
        self.missing = missing


@dataclass(frozen=True)
class RiskTier:
    tier: TierLevel
    required_controls: frozenset[ControlKind]

    def __post_init__(self):
        object.__setattr__(self, "tier", TierLevel(self.tier))
        object.__setattr__(self, "required_controls", frozenset(self.required_controls))
        if self.tier is TierLevel.HIGH:
            needed = {ControlKind.HUMAN_IN_LOOP, ControlKind.OUTPUT_CONTROL}
            if not needed <= self.required_controls:
                raise ValueError("high tier must require human_in_loop and output_control")


def default_tier(level: TierLevel | str) -> RiskTier:
    level = TierLevel(level)
    return RiskTier(level, DEFAULT_TIER_CONTROLS[level])


def build_tier_ladder(
    overrides: dict[str, list[str]] | None = None,
) -> dict[TierLevel, RiskTier]:
    """Tier ladder from config overrides, checked for nesting
    (low <= medium <= high)."""
    controls = dict(DEFAULT_TIER_CONTROLS)
    for name, kinds in (overrides or {}).items():
        controls[TierLevel(name)] = frozenset(ControlKind(k) for k in kinds)
    if not (
        controls[TierLevel.LOW]
        <= controls[TierLevel.MEDIUM]
        <= controls[TierLevel.HIGH]
    ):
        raise ValueError("tier control sets must be nested: low <= medium <= high")
    return {level: RiskTier(level, controls[level]) for level in TierLevel}


def validate_controls(
    configured: frozenset[ControlKind] | set[ControlKind],
    tier: RiskTier,
) -> list[ControlKind]:
    """Controls the tier requires but the configuration lacks (empty = ok)."""
    return sorted(tier.required_controls - set(configured), key=lambda c: c.value)


@dataclass
class HallucinationGateConfig:
    enabled: bool = False
    nli_endpoint: str | None = None
    max_score: float = 0.5


@dataclass
class MonitoringConfig:
    window_hours: int = 24
    thresholds: dict = field(default_factory=dict)       # name -> ThresholdSpec kwargs
    actions: dict[str, str] = field(default_factory=dict)
    baseline_bins: list[float] | None = None
    baseline_centroids: list[list[float]] | None = None
    embed_endpoint: str | None = None


@dataclass
class GatewayConfig:
    tier: RiskTier
    endpoints: dict[str, EndpointSpec]
    model_endpoint: str
    users: dict[str, str] = field(default_factory=dict)   # user_id -> role
    approved_usages: frozenset[str] = frozenset()
    input_pii: bool = True
    input_blocklist: tuple[str, ...] = ()
    toxicity_endpoint: str | None = None
    toxicity_threshold: float = 0.5
    toxicity_lexicon_path: str | None = None
    max_response_chars: int = 8000
    hallucination_gate: HallucinationGateConfig = field(default_factory=HallucinationGateConfig)
    disclaimer: str = "AI-generated content. Review before relying on it."
    state_dir: str = "./gateway_state"
    store_prompts: bool = False
    audit_salt: str = ""
    default_decoding: DecodingParams = field(default_factory=DecodingParams)
    default_seed: int = 0
    configured_controls: frozenset[ControlKind] = frozenset()
    monitoring: MonitoringConfig = field(default_factory=MonitoringConfig)


def parse_endpoint(endpoint_id: str, raw: dict) -> EndpointSpec:
    return EndpointSpec(
        id=endpoint_id,
        kind=raw["kind"],
        transport=raw.get("transport", "mock"),
        uri=raw.get("uri"),
        mock_script=raw.get("mock_script"),
        max_parallel=raw.get("max_parallel", 8),
    )


def load_gateway_config(path: str | Path) -> GatewayConfig:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    ladder = build_tier_ladder(raw.get("tier_controls"))
    tier = ladder[TierLevel(raw.get("tier", "medium"))]
    endpoints = {
        eid: parse_endpoint(eid, spec) for eid, spec in (raw.get("endpoints") or {}).items()
    }
    controls = raw.get("controls") or {}
    configured = set()
    section_to_kind = {
        "user": ControlKind.USER_CONTROL,
        "usage": ControlKind.USAGE_CONTROL,
        "input": ControlKind.INPUT_CONTROL,
        "output": ControlKind.OUTPUT_CONTROL,
        "terms": ControlKind.TERMS_OF_USE,
        "human_in_loop": ControlKind.HUMAN_IN_LOOP,
    }
    for section, kind in section_to_kind.items():
        if section in controls and controls[section] is not None:
            configured.add(kind)
    user_cfg = controls.get("user") or {}
    usage_cfg = controls.get("usage") or {}
    input_cfg = controls.get("input") or {}
    output_cfg = controls.get("output") or {}
    terms_cfg = controls.get("terms") or {}
    halluc_cfg = output_cfg.get("hallucination") or {}
    audit_cfg = raw.get("audit") or {}
    mon_raw = raw.get("monitoring") or {}
    defaults = raw.get("defaults") or {}
    decoding = DecodingParams.from_dict(defaults.get("decoding", {}))
    return GatewayConfig(
        tier=tier,
        endpoints=endpoints,
        model_endpoint=raw.get("model_endpoint", ""),
        users=dict(user_cfg.get("users", {})),
        approved_usages=frozenset(usage_cfg.get("approved", [])),
        input_pii=bool(input_cfg.get("pii", True)),
        input_blocklist=tuple(input_cfg.get("blocklist", [])),
        toxicity_endpoint=output_cfg.get("toxicity_endpoint"),
        toxicity_threshold=float(output_cfg.get("toxicity_threshold", 0.5)),
        toxicity_lexicon_path=output_cfg.get("lexicon"),
        max_response_chars=int(output_cfg.get("max_chars", 8000)),
        hallucination_gate=HallucinationGateConfig(
            enabled=bool(halluc_cfg.get("enabled", False)),
            nli_endpoint=halluc_cfg.get("nli_endpoint"),
            max_score=float(halluc_cfg.get("max_score", 0.5)),
        ),
        disclaimer=terms_cfg.get(
            "disclaimer", "AI-generated content. Review before relying on it."
        ),
        state_dir=audit_cfg.get("dir", "./gateway_state"),
        store_prompts=bool(audit_cfg.get("store_prompts", False)),
        audit_salt=str(audit_cfg.get("salt", "")),
        default_decoding=decoding,
        default_seed=int(defaults.get("seed", 0)),
        configured_controls=frozenset(configured),
        monitoring=MonitoringConfig(
            window_hours=int(mon_raw.get("window_hours", 24)),
            thresholds=mon_raw.get("thresholds", {}),
            actions=mon_raw.get("actions", {}),
            baseline_bins=mon_raw.get("baseline_bins"),
            baseline_centroids=mon_raw.get("baseline_centroids"),
            embed_endpoint=mon_raw.get("embed_endpoint"),
        ),
    )
