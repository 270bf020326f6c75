"""Core domain types shared by the scorers, the batch runner and the gateway.

All types are immutable value objects; invariants are enforced at
construction so downstream code never re-validates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import datetime, timezone

NLI_SUM_TOLERANCE = 1e-6


class TaskType(str, enum.Enum):
    SUMMARIZATION = "summarization"
    RAG = "rag"
    GENERAL = "general"


class EndpointKind(str, enum.Enum):
    CHAT = "chat"
    EMBEDDING = "embedding"
    NLI_CLASSIFIER = "nli_classifier"
    TOXICITY_CLASSIFIER = "toxicity_classifier"


class Transport(str, enum.Enum):
    HTTP = "http"
    MOCK = "mock"


@dataclass(frozen=True)
class ValidationSample:
    """One corpus item: a query, its retrieved/source contexts and the
    generated output under evaluation.

    Invariants: rag samples carry at least one context; summarization
    samples carry exactly one (the source document).
    """

    id: str
    task: TaskType
    query: str
    contexts: tuple[str, ...] = ()
    output: str | None = None
    reference: str | None = None
    annotations: dict[str, str] | None = None
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "task", TaskType(self.task))
        object.__setattr__(self, "contexts", tuple(self.contexts))
        if not self.id:
            raise ValueError("sample id must be non-empty")
        if self.task is TaskType.RAG and not self.contexts:
            raise ValueError(f"sample {self.id}: rag samples require at least one context")
        if self.task is TaskType.SUMMARIZATION and len(self.contexts) != 1:
            raise ValueError(
                f"sample {self.id}: summarization samples require exactly one context"
            )


@dataclass(frozen=True)
class DecodingParams:
    """Decoding configuration recorded with every generation."""

    temperature: float = 0.0
    top_p: float = 1.0
    max_tokens: int = 256
    stop: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "stop", tuple(self.stop))
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    def to_dict(self) -> dict:
        return {
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
            "stop": list(self.stop),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecodingParams":
        return cls(
            temperature=d.get("temperature", 0.0),
            top_p=d.get("top_p", 1.0),
            max_tokens=d.get("max_tokens", 256),
            stop=tuple(d.get("stop", ())),
        )


@dataclass(frozen=True)
class Generation:
    """A model response plus the full decoding and seed provenance.

    Empty text is only legal for explicit refusals.
    """

    text: str
    decoding: DecodingParams
    seed: int
    endpoint_id: str
    created_at: datetime
    latency_ms: int = 0
    refusal: bool = False

    def __post_init__(self):
        if self.decoding is None:
            raise ValueError("decoding must be populated")
        if self.seed is None:
            raise ValueError("seed must be populated")
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be >= 0")
        if self.text == "" and not self.refusal:
            raise ValueError("empty text requires the refusal flag")


@dataclass(frozen=True)
class EndpointSpec:
    """A model/embedding/classifier endpoint, either HTTP or a deterministic mock.

    Mock behavior is a pure function of (input, seed) so every test and
    every validation run is reproducible across processes.
    """

    id: str
    kind: EndpointKind
    transport: Transport = Transport.MOCK
    uri: str | None = None
    mock_script: dict | None = None
    max_parallel: int = 8

    def __post_init__(self):
        object.__setattr__(self, "kind", EndpointKind(self.kind))
        object.__setattr__(self, "transport", Transport(self.transport))
        if self.transport is Transport.HTTP and not self.uri:
            raise ValueError(f"endpoint {self.id}: http transport requires a uri")
        if self.transport is Transport.MOCK and not self.mock_script:
            raise ValueError(f"endpoint {self.id}: mock transport requires a mock_script")


@dataclass(frozen=True)
class NliVerdict:
    """Entail/neutral/contradict probabilities for one premise-hypothesis pair."""

    p_entail: float
    p_neutral: float
    p_contradict: float

    def __post_init__(self):
        for name in ("p_entail", "p_neutral", "p_contradict"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        total = self.p_entail + self.p_neutral + self.p_contradict
        if abs(total - 1.0) > NLI_SUM_TOLERANCE:
            raise ValueError(f"NLI probabilities sum to {total}, expected 1")


# Mock generations use the epoch so they are bit-reproducible across runs.
MOCK_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
