"""HTTP surface for the gateway.

JSON bodies throughout. Generation outcomes map to status codes:
200 allowed, 202 held, 401 unknown user, 403 blocked (body carries the
control decision), 503 upstream failure.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from ..monitoring import (
    DEFAULT_ACTIONS,
    DEFAULT_THRESHOLDS,
    ThresholdSpec,
    compute_kpis,
    parse_window,
    snapshot_to_dict,
)
from ..types import DecodingParams
from .controls import ControlKind
from .holds import AlreadyDecided, HeldState, NotFound
from .service import Gateway, GenerateRequest


class GenerateBody(BaseModel):
    user_id: str
    usage_id: str
    prompt: str
    decoding: dict | None = None
    seed: int | None = None
    contexts: list[str] = Field(default_factory=list)
    request_id: str | None = None


class DecisionBody(BaseModel):
    decision: str  # approve | reject
    reviewer_id: str


class FeedbackBody(BaseModel):
    value: float  # 1..5


def _thresholds_of(gateway: Gateway) -> dict[str, ThresholdSpec]:
    merged = dict(DEFAULT_THRESHOLDS)
    for name, raw in gateway.config.monitoring.thresholds.items():
        merged[name] = ThresholdSpec(
            amber=float(raw["amber"]),
            red=float(raw["red"]),
            higher_is_worse=bool(raw.get("higher_is_worse", True)),
        )
    return merged


def create_app(gateway: Gateway) -> FastAPI:
    app = FastAPI(title="mrm gateway")
    app.state.gateway = gateway
    # the review console is a static-host SPA on another origin
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["GET", "POST"], allow_headers=["*"]
    )

    @app.post("/v1/generate")
    def generate(body: GenerateBody):
        request = GenerateRequest(
            user_id=body.user_id,
            usage_id=body.usage_id,
            prompt=body.prompt,
            decoding=DecodingParams.from_dict(body.decoding) if body.decoding else None,
            seed=body.seed,
            contexts=body.contexts,
            request_id=body.request_id,
        )
        result = gateway.handle_generate(request)
        if result.outcome == "allowed":
            return {
                "text": result.text,
                "request_id": result.request_id,
                "disclaimer": result.disclaimer,
            }
        if result.outcome == "held":
            return JSONResponse(status_code=202, content={"request_id": result.request_id})
        if result.outcome == "error":
            return JSONResponse(
                status_code=503,
                content={"request_id": result.request_id, "detail": "upstream unavailable"},
            )
        status = 401 if result.decision.stage == ControlKind.USER_CONTROL.value else 403
        return JSONResponse(status_code=status, content=result.decision.to_dict())

    @app.get("/v1/result/{request_id}")
    def result(request_id: str):
        try:
            state, text = gateway.get_result(request_id)
        except NotFound:
            raise HTTPException(status_code=404, detail=f"no held result {request_id}")
        if state == "pending":
            return JSONResponse(status_code=202, content={"state": state})
        return {"state": state, "text": text}

    @app.get("/v1/held")
    def held(state: str | None = Query(default=None)):
        filt = HeldState(state) if state else None
        now = datetime.now(timezone.utc)
        return {
            "items": [
                {
                    **item.to_dict(),
                    "age_s": int((now - item.created_at).total_seconds()),
                }
                for item in gateway.holds.list(filt)
            ]
        }

    @app.post("/v1/held/{request_id}/decision")
    def decide(request_id: str, body: DecisionBody):
        try:
            item = gateway.hitl_transition(request_id, body.decision, body.reviewer_id)
        except NotFound:
            raise HTTPException(status_code=404, detail=f"no held item {request_id}")
        except AlreadyDecided as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return item.to_dict()

    @app.get("/v1/audit")
    def audit(
        user_id: str | None = None,
        usage_id: str | None = None,
        outcome: str | None = None,
        since: datetime | None = None,
        until: datetime | None = None,
    ):
        events = gateway.audit.query(
            user_id=user_id, usage_id=usage_id, outcome=outcome, since=since, until=until
        )
        return {"events": [e.to_dict() for e in events]}

    @app.get("/v1/kpis")
    def kpis(window: str | None = None, hours: int | None = None):
        mon = gateway.config.monitoring
        window_hours = hours or parse_window(window, mon.window_hours)
        end = datetime.now(timezone.utc)
        start = end - timedelta(hours=window_hours)
        thresholds = _thresholds_of(gateway)
        snapshot = compute_kpis(
            gateway.kpis.events(),
            start,
            end,
            thresholds=thresholds,
            actions={**DEFAULT_ACTIONS, **mon.actions},
            baseline_bins=mon.baseline_bins,
        )
        body = snapshot_to_dict(snapshot)
        # threshold annotations ride along so clients never recompute bounds
        body["thresholds"] = {
            name: {"amber": t.amber, "red": t.red, "higher_is_worse": t.higher_is_worse}
            for name, t in sorted(thresholds.items())
        }
        return body

    @app.post("/v1/feedback")
    def feedback(body: FeedbackBody):
        gateway.record_feedback(body.value)
        return {"recorded": True}

    return app
