"""Validation run configuration.

YAML in, dataclass out. Every enabled suite declares which endpoint roles
it needs; validation fails before any endpoint is touched when a role is
missing or bound to the wrong endpoint kind. Seeds are explicit: there is
no implicit randomness anywhere in a run.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import MrmError
from .gateway.controls import parse_endpoint
from .types import EndpointKind, EndpointSpec

SUITE_ORDER = (
    "pii",
    "sampling",
    "metrics",
    "robustness",
    "fairness",
    "weakness",
    "hallucination",
    "toxicity",
    "consistency",
)

# role -> required endpoint kind
ROLE_KINDS = {
    "chat": EndpointKind.CHAT,
    "chat_b": EndpointKind.CHAT,
    "embedding": EndpointKind.EMBEDDING,
    "nli": EndpointKind.NLI_CLASSIFIER,
    "toxicity": EndpointKind.TOXICITY_CLASSIFIER,
}

# roles each suite cannot run without (toxicity scoring falls back to the
# lexicon, so its classifier role is optional)
SUITE_ROLES = {
    "pii": (),
    "sampling": ("embedding",),
    "metrics": ("nli", "embedding"),
    "robustness": ("chat", "embedding"),
    "fairness": ("embedding",),
    "weakness": ("embedding",),
    "hallucination": ("nli",),
    "toxicity": (),
    "consistency": ("chat", "chat_b", "embedding"),
}


class ConfigInvalid(MrmError):
    pass


@dataclass
class RunConfig:
    corpus_path: str
    endpoints: dict[str, EndpointSpec]
    roles: dict[str, str]
    suites: dict[str, dict]
    seed: int
    output_dir: str = "."
    run_timestamp: str | None = None
    gates: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def enabled_suites(self) -> list[str]:
        return [s for s in SUITE_ORDER if self.suites.get(s, {}).get("enabled", False)]

    def endpoint_for(self, role: str) -> EndpointSpec:
        return self.endpoints[self.roles[role]]

    def has_role(self, role: str) -> bool:
        return role in self.roles and self.roles[role] in self.endpoints

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def load_run_config(path: str | Path) -> RunConfig:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    cfg = RunConfig(
        corpus_path=raw.get("corpus", ""),
        endpoints={
            eid: parse_endpoint(eid, spec)
            for eid, spec in (raw.get("endpoints") or {}).items()
        },
        roles=dict(raw.get("roles") or {}),
        suites=dict(raw.get("suites") or {}),
        seed=int(raw["seed"]) if "seed" in raw else _missing_seed(),
        output_dir=raw.get("output_dir", "."),
        run_timestamp=raw.get("run_timestamp"),
        gates=dict(raw.get("gates") or {}),
        raw=raw,
    )
    validate_run_config(cfg)
    return cfg


def _missing_seed():
    raise ConfigInvalid("run config must set an explicit seed")


def validate_run_config(cfg: RunConfig) -> None:
    problems: list[str] = []
    if not cfg.corpus_path:
        problems.append("corpus path is required")
    elif not Path(cfg.corpus_path).exists():
        problems.append(f"corpus file not found: {cfg.corpus_path}")
    for role, eid in cfg.roles.items():
        if role not in ROLE_KINDS:
            problems.append(f"unknown role {role!r}")
            continue
        if eid not in cfg.endpoints:
            problems.append(f"role {role!r} bound to unknown endpoint {eid!r}")
            continue
        if cfg.endpoints[eid].kind is not ROLE_KINDS[role]:
            problems.append(
                f"role {role!r} needs kind {ROLE_KINDS[role].value}, "
                f"endpoint {eid!r} is {cfg.endpoints[eid].kind.value}"
            )
    for suite in cfg.enabled_suites():
        for role in SUITE_ROLES[suite]:
            if not cfg.has_role(role):
                problems.append(f"suite {suite!r} requires endpoint role {role!r}")
    unknown = set(cfg.suites) - set(SUITE_ORDER)
    if unknown:
        problems.append(f"unknown suites: {sorted(unknown)}")
    if problems:
        raise ConfigInvalid("; ".join(problems))
