from .app import create_app
from .audit import AuditEvent, AuditLog
from .controls import (
    DEFAULT_TIER_CONTROLS,
    ControlKind,
    ControlsMissing,
    GatewayConfig,
    RiskTier,
    TierLevel,
    build_tier_ladder,
    default_tier,
    load_gateway_config,
    validate_controls,
)
from .holds import AlreadyDecided, HeldItem, HeldState, HeldStore, NotFound
from .service import (
    REFUSAL_TEXT,
    ControlDecision,
    Gateway,
    GatewayResult,
    GenerateRequest,
)

__all__ = [
    "AuditEvent",
    "AuditLog",
    "AlreadyDecided",
    "ControlDecision",
    "ControlKind",
    "ControlsMissing",
    "DEFAULT_TIER_CONTROLS",
    "Gateway",
    "GatewayConfig",
    "GatewayResult",
    "GenerateRequest",
    "HeldItem",
    "HeldState",
    "HeldStore",
    "NotFound",
    "REFUSAL_TEXT",
    "RiskTier",
    "TierLevel",
    "build_tier_ladder",
    "create_app",
    "default_tier",
    "load_gateway_config",
    "validate_controls",
]
