"""The generation gateway: a fixed control pipeline around a chat model.

Stage order is fixed with the cheapest and safest checks first and the
model call as late as possible, so a blocked input never reaches the
model:

  1. user control     - caller must be a configured user
  2. usage control    - usage id must be on the approved list
  3. input control    - PII scan and blocklist patterns on the prompt
  4. model call
  5. output control   - toxicity gate, length bound, optional
                        hallucination gate when contexts are supplied
  6. terms of use     - disclaimer appended as a suffix block
  7. human in loop    - hold for review when the tier requires it

Every request emits exactly one audit event, whatever the outcome.
"""

from __future__ import annotations

import logging
import re
import uuid
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import endpoints as ep
from ..errors import EndpointUnreachable, MrmError
from ..hallucination import nli_score
from ..monitoring import EventKind, KpiEvent, KpiStore, now_utc
from ..pii import scan_pii
from ..toxicity import load_lexicon, toxicity_gate
from ..types import DecodingParams, Generation
from .audit import AuditLog
from .controls import ControlKind, ControlsMissing, GatewayConfig, validate_controls
from .holds import AlreadyDecided, HeldItem, HeldState, HeldStore, NotFound

log = logging.getLogger(__name__)

REFUSAL_TEXT = "This response was rejected during human review and cannot be released."

__all__ = [
    "ControlDecision",
    "Gateway",
    "GatewayResult",
    "Unauthorized",
    "UsageNotApproved",
    "UpstreamUnavailable",
    "NotFound",
    "AlreadyDecided",
    "REFUSAL_TEXT",
]


class Unauthorized(MrmError):
    pass


class UsageNotApproved(MrmError):
    pass


class UpstreamUnavailable(MrmError):
    pass


@dataclass(frozen=True)
class ControlDecision:
    request_id: str
    outcome: str  # allowed | blocked | held | error
    stage: str    # last stage reached
    reasons: tuple[tuple[str, str], ...] = ()
    disclaimer_applied: bool = False

    def to_dict(self) -> dict:
        return {
            "request_id": self.request_id,
            "outcome": self.outcome,
            "stage": self.stage,
            "reasons": [list(r) for r in self.reasons],
            "disclaimer_applied": self.disclaimer_applied,
        }


@dataclass(frozen=True)
class GatewayResult:
    decision: ControlDecision
    text: str | None = None
    disclaimer: str | None = None

    @property
    def request_id(self) -> str:
        return self.decision.request_id

    @property
    def outcome(self) -> str:
        return self.decision.outcome


@dataclass
class GenerateRequest:
    user_id: str
    usage_id: str
    prompt: str
    decoding: DecodingParams | None = None
    seed: int | None = None
    contexts: list[str] = field(default_factory=list)
    request_id: str | None = None


class Gateway:
    """Holds the pipeline state: audit log, held-output store, KPI stream.

    generate_fn may be injected for tests; by default the configured chat
    endpoint is called. Construction fails when the risk tier requires
    controls the configuration does not provide.
    """

    def __init__(
        self,
        config: GatewayConfig,
        generate_fn: Callable[[str, DecodingParams, int], Generation] | None = None,
        kpi_store: KpiStore | None = None,
        state_dir: str | None = None,
    ):
        missing = validate_controls(config.configured_controls, config.tier)
        if missing:
            raise ControlsMissing(missing)
        self.config = config
        base = state_dir or config.state_dir
        self.audit = AuditLog(
            f"{base}/audit.jsonl", salt=config.audit_salt, store_prompts=config.store_prompts
        )
        self.holds = HeldStore(f"{base}/holds.jsonl")
        self.kpis = kpi_store or KpiStore(f"{base}/kpi_events.jsonl")
        self._lexicon = load_lexicon(config.toxicity_lexicon_path)
        if generate_fn is not None:
            self._generate = generate_fn
        else:
            model = config.endpoints[config.model_endpoint]
            self._generate = lambda prompt, decoding, seed: ep.generate(
                model, prompt, decoding, seed
            )
        self._query_binner = self._build_query_binner()

    def _build_query_binner(self) -> Callable[[str], int] | None:
        mon = self.config.monitoring
        if not mon.baseline_centroids or not mon.embed_endpoint:
            return None
        centroids = np.asarray(mon.baseline_centroids, dtype=np.float64)
        embed_spec = self.config.endpoints[mon.embed_endpoint]

        def binner(prompt: str) -> int:
            vec = ep.embed(embed_spec, [prompt])[0]
            return int(np.argmin(np.linalg.norm(centroids - vec, axis=1)))

        return binner

    # -- pipeline ----------------------------------------------------------

    def handle_generate(self, request: GenerateRequest) -> GatewayResult:
        request_id = request.request_id or uuid.uuid4().hex
        decoding = request.decoding or self.config.default_decoding
        seed = request.seed if request.seed is not None else self.config.default_seed
        configured = self.config.configured_controls
        self._kpi(EventKind.ATTEMPT)

        def finish(
            outcome: str,
            stage: str,
            reasons: list[tuple[str, str]],
            text: str | None = None,
            disclaimer: str | None = None,
            gen: Generation | None = None,
        ) -> GatewayResult:
            meta = None
            if gen is not None:
                meta = {
                    "decoding": gen.decoding.to_dict(),
                    "seed": gen.seed,
                    "latency_ms": gen.latency_ms,
                    "endpoint_id": gen.endpoint_id,
                }
            self.audit.append(
                request_id=request_id,
                user_id=request.user_id,
                usage_id=request.usage_id,
                prompt=request.prompt,
                outcome=outcome,
                reasons=reasons,
                generation_metadata=meta,
            )
            decision = ControlDecision(
                request_id=request_id,
                outcome=outcome,
                stage=stage,
                reasons=tuple(reasons),
                disclaimer_applied=disclaimer is not None,
            )
            return GatewayResult(decision=decision, text=text, disclaimer=disclaimer)

        # 1. user control
        if ControlKind.USER_CONTROL in configured:
            if request.user_id not in self.config.users:
                return finish(
                    "blocked",
                    ControlKind.USER_CONTROL.value,
                    [(ControlKind.USER_CONTROL.value, f"unknown user {request.user_id!r}")],
                )

        # 2. usage control
        if ControlKind.USAGE_CONTROL in configured:
            if request.usage_id not in self.config.approved_usages:
                return finish(
                    "blocked",
                    ControlKind.USAGE_CONTROL.value,
                    [(ControlKind.USAGE_CONTROL.value,
                      f"usage {request.usage_id!r} not on the approved list")],
                )

        # 3. input control
        if ControlKind.INPUT_CONTROL in configured:
            reasons: list[tuple[str, str]] = []
            if self.config.input_pii:
                findings = scan_pii(request.prompt)
                if findings:
                    kinds = sorted({f.kind.value for f in findings})
                    reasons.append(
                        (ControlKind.INPUT_CONTROL.value,
                         f"prompt contains formatted PII: {', '.join(kinds)}")
                    )
            for pattern in self.config.input_blocklist:
                if re.search(pattern, request.prompt):
                    reasons.append(
                        (ControlKind.INPUT_CONTROL.value, f"prompt matches blocklist {pattern!r}")
                    )
                    break
            if reasons:
                return finish("blocked", ControlKind.INPUT_CONTROL.value, reasons)

        # 4. model call
        if self._query_binner is not None:
            try:
                self._kpi(EventKind.QUERY_EMBEDDING_BIN, bin=self._query_binner(request.prompt))
            except MrmError as exc:  # drift tracking must never block serving
                log.warning("query binning failed: %s", exc)
        try:
            gen = self._generate(request.prompt, decoding, seed)
        except EndpointUnreachable as exc:
            return finish("error", "model_call", [("model_call", f"upstream unreachable: {exc}")])
        text = gen.text

        # 5. output control
        if ControlKind.OUTPUT_CONTROL in configured:
            classifier = (
                self.config.endpoints.get(self.config.toxicity_endpoint)
                if self.config.toxicity_endpoint
                else None
            )
            verdict = toxicity_gate(
                text, self.config.toxicity_threshold, classifier, self._lexicon
            )
            self._kpi(EventKind.TOXICITY_SCORE, value=verdict.score)
            if verdict.blocked:
                return finish(
                    "blocked",
                    ControlKind.OUTPUT_CONTROL.value,
                    [(ControlKind.OUTPUT_CONTROL.value,
                      f"toxicity {verdict.score:.3f} >= {self.config.toxicity_threshold}")],
                    gen=gen,
                )
            if len(text) > self.config.max_response_chars:
                return finish(
                    "blocked",
                    ControlKind.OUTPUT_CONTROL.value,
                    [(ControlKind.OUTPUT_CONTROL.value,
                      f"response length {len(text)} exceeds bound "
                      f"{self.config.max_response_chars}")],
                    gen=gen,
                )
            hg = self.config.hallucination_gate
            if hg.enabled and request.contexts:
                nli_ep = self.config.endpoints[hg.nli_endpoint]
                score = nli_score(request.contexts, text, nli_ep)
                self._kpi(EventKind.HALLUCINATION_SCORE, value=score.max_score)
                if score.max_score >= hg.max_score:
                    return finish(
                        "blocked",
                        ControlKind.OUTPUT_CONTROL.value,
                        [(ControlKind.OUTPUT_CONTROL.value,
                          f"hallucination {score.max_score:.3f} >= {hg.max_score}")],
                        gen=gen,
                    )

        # 6. terms of use
        disclaimer = None
        if ControlKind.TERMS_OF_USE in configured:
            disclaimer = self.config.disclaimer
            text = f"{text}\n\n---\n{disclaimer}"

        # 7. human in the loop (held iff the tier demands it)
        if ControlKind.HUMAN_IN_LOOP in self.config.tier.required_controls:
            self.holds.put(request_id, text)
            self._kpi(EventKind.SUCCESS)
            return finish(
                "held",
                ControlKind.HUMAN_IN_LOOP.value,
                [(ControlKind.HUMAN_IN_LOOP.value, "held for certified review")],
                gen=gen,
            )

        self._kpi(EventKind.SUCCESS)
        return finish("allowed", "complete", [], text=text, disclaimer=disclaimer, gen=gen)

    # -- review flow -------------------------------------------------------

    def hitl_transition(self, request_id: str, decision: str, reviewer_id: str) -> HeldItem:
        if decision not in ("approve", "reject"):
            raise ValueError(f"decision must be approve or reject, got {decision!r}")
        item = self.holds.decide(request_id, decision == "approve", reviewer_id)
        self.audit.append(
            request_id=request_id,
            user_id=reviewer_id,
            usage_id="hitl_review",
            prompt="",
            outcome=f"review_{item.state.value}",
            reasons=[("human_in_loop", f"decided by {reviewer_id}")],
        )
        return item

    def get_result(self, request_id: str) -> tuple[str, str | None]:
        """(state, text) for a held request; rejected items surface the
        refusal text, pending items no text yet."""
        item = self.holds.get(request_id)
        if item.state is HeldState.PENDING:
            return ("pending", None)
        if item.state is HeldState.APPROVED:
            return ("approved", item.response_text)
        return ("rejected", REFUSAL_TEXT)

    def record_feedback(self, value: float) -> None:
        self._kpi(EventKind.FEEDBACK, value=value)

    def _kpi(self, kind: EventKind, value: float | None = None, bin: int | None = None) -> None:
        self.kpis.record_event(KpiEvent(timestamp=now_utc(), kind=kind, value=value, bin=bin))
