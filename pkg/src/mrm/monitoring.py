"""Ongoing-monitoring KPI engine.

Append-only event log feeding windowed KPI snapshots: generation success
ratio, mean toxicity/hallucination scores, user feedback, and query-domain
drift (population stability index over embedding-cluster bins). Each KPI
gets a traffic-light status against configured thresholds; the overall
status is the worst light, and amber/red KPIs emit their configured
action-plan keys.
"""

from __future__ import annotations

import enum
import json
import math
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import MrmError

PSI_SMOOTHING = 1e-4
HISTOGRAM_SUM_TOLERANCE = 1e-6
DEFAULT_N_BINS = 10
DEFAULT_WINDOW_HOURS = 24


class InvalidEvent(MrmError):
    pass


class BinMismatch(MrmError):
    pass


class MissingThreshold(MrmError):
    pass


class EventKind(str, enum.Enum):
    ATTEMPT = "attempt"
    SUCCESS = "success"
    TOXICITY_SCORE = "toxicity_score"
    HALLUCINATION_SCORE = "hallucination_score"
    FEEDBACK = "feedback"
    QUERY_EMBEDDING_BIN = "query_embedding_bin"


class Status(str, enum.Enum):
    GREEN = "green"
    AMBER = "amber"
    RED = "red"


_STATUS_RANK = {Status.GREEN: 0, Status.AMBER: 1, Status.RED: 2}

_SCORE_KINDS = {EventKind.TOXICITY_SCORE, EventKind.HALLUCINATION_SCORE}


@dataclass(frozen=True)
class KpiEvent:
    timestamp: datetime
    kind: EventKind
    value: float | None = None
    bin: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EventKind(self.kind))
        if self.kind in _SCORE_KINDS:
            if self.value is None or not 0.0 <= self.value <= 1.0:
                raise InvalidEvent(f"{self.kind.value} requires value in [0, 1]")
        elif self.kind is EventKind.FEEDBACK:
            if self.value is None or not 1.0 <= self.value <= 5.0:
                raise InvalidEvent("feedback requires value in [1, 5]")
        elif self.kind is EventKind.QUERY_EMBEDDING_BIN:
            if self.bin is None or self.bin < 0:
                raise InvalidEvent("query_embedding_bin requires a non-negative bin")


@dataclass(frozen=True)
class ThresholdSpec:
    amber: float
    red: float
    higher_is_worse: bool = True

    def __post_init__(self):
        if self.higher_is_worse and not self.red > self.amber:
            raise ValueError("red bound must exceed amber when higher is worse")
        if not self.higher_is_worse and not self.red < self.amber:
            raise ValueError("red bound must undercut amber when lower is worse")

    def status(self, value: float) -> Status:
        # Inclusive at the bound: a value exactly at a bound takes its color.
        if self.higher_is_worse:
            if value >= self.red:
                return Status.RED
            if value >= self.amber:
                return Status.AMBER
        else:
            if value <= self.red:
                return Status.RED
            if value <= self.amber:
                return Status.AMBER
        return Status.GREEN


DEFAULT_THRESHOLDS: dict[str, ThresholdSpec] = {
    "success_ratio": ThresholdSpec(amber=0.95, red=0.85, higher_is_worse=False),
    "mean_toxicity": ThresholdSpec(amber=0.2, red=0.5),
    "mean_hallucination": ThresholdSpec(amber=0.3, red=0.6),
    "mean_feedback": ThresholdSpec(amber=3.5, red=2.5, higher_is_worse=False),
    "drift_psi": ThresholdSpec(amber=0.1, red=0.25),
}

DEFAULT_ACTIONS: dict[str, str] = {
    "success_ratio": "investigate_generation_failures",
    "mean_toxicity": "tighten_output_guardrails",
    "mean_hallucination": "enable_human_review",
    "mean_feedback": "review_user_feedback_samples",
    "drift_psi": "refresh_baseline_and_revalidate",
}


@dataclass(frozen=True)
class KpiSnapshot:
    window_start: datetime
    window_end: datetime
    success_ratio: float | None
    mean_toxicity: float | None
    mean_hallucination: float | None
    mean_feedback: float | None
    drift_psi: float | None
    per_kpi_status: dict[str, Status] = field(default_factory=dict)
    overall: Status = Status.GREEN
    actions: tuple[str, ...] = ()
    attempts: int = 0
    insufficient_data: bool = False

    def values(self) -> dict[str, float]:
        present = {}
        for name in ("success_ratio", "mean_toxicity", "mean_hallucination",
                     "mean_feedback", "drift_psi"):
            v = getattr(self, name)
            if v is not None:
                present[name] = v
        return present


def psi(baseline: list[float], current: list[float]) -> float:
    """Population stability index between two probability histograms.

    Zero bins get 1e-4 smoothing (then renormalized) so the log is always
    defined. Symmetric, non-negative, 0 iff the histograms are identical.
    """
    if len(baseline) != len(current) or len(baseline) < 2:
        raise BinMismatch(f"need matching bin counts >= 2, got {len(baseline)}/{len(current)}")
    for name, hist in (("baseline", baseline), ("current", current)):
        if any(v < 0 for v in hist):
            raise ValueError(f"{name} histogram has negative mass")
        if abs(sum(hist) - 1.0) > HISTOGRAM_SUM_TOLERANCE:
            raise ValueError(f"{name} histogram sums to {sum(hist)}, expected 1")

    def smooth(hist: list[float]) -> list[float]:
        padded = [v if v > 0 else PSI_SMOOTHING for v in hist]
        total = sum(padded)
        return [v / total for v in padded]

    p = smooth(baseline)
    q = smooth(current)
    return sum((pi - qi) * math.log(pi / qi) for pi, qi in zip(p, q))


class KpiStore:
    """Durable append-only event log with an in-memory mirror.

    Single writer; snapshots read a consistent copy under the lock.
    """

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path else None
        self._events: list[KpiEvent] = []
        self._lock = threading.Lock()
        if self._path and self._path.exists():
            with open(self._path, encoding="utf-8") as fh:
                for raw in fh:
                    if raw.strip():
                        self._events.append(_event_from_json(json.loads(raw)))

    def record_event(self, event: KpiEvent) -> None:
        with self._lock:
            if self._path:
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(_event_to_json(event)) + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            self._events.append(event)

    def events(self) -> list[KpiEvent]:
        with self._lock:
            return list(self._events)


def _event_to_json(e: KpiEvent) -> dict:
    d = {"timestamp": e.timestamp.isoformat(), "kind": e.kind.value}
    if e.value is not None:
        d["value"] = e.value
    if e.bin is not None:
        d["bin"] = e.bin
    return d


def _event_from_json(d: dict) -> KpiEvent:
    return KpiEvent(
        timestamp=datetime.fromisoformat(d["timestamp"]),
        kind=EventKind(d["kind"]),
        value=d.get("value"),
        bin=d.get("bin"),
    )


def evaluate_status(
    values: dict[str, float],
    thresholds: dict[str, ThresholdSpec],
    actions: dict[str, str] | None = None,
) -> tuple[dict[str, Status], Status, tuple[str, ...]]:
    """Traffic-light each present KPI; overall is the worst light; amber or
    red KPIs emit their configured action keys. Absent KPIs never alarm."""
    actions = actions if actions is not None else DEFAULT_ACTIONS
    per_kpi: dict[str, Status] = {}
    triggered: list[str] = []
    for name, value in values.items():
        if name not in thresholds:
            raise MissingThreshold(f"no thresholds configured for KPI {name!r}")
        status = thresholds[name].status(value)
        per_kpi[name] = status
        if status is not Status.GREEN and name in actions:
            triggered.append(actions[name])
    overall = max(per_kpi.values(), key=lambda s: _STATUS_RANK[s], default=Status.GREEN)
    return per_kpi, overall, tuple(triggered)


def compute_kpis(
    events: list[KpiEvent],
    window_start: datetime,
    window_end: datetime,
    thresholds: dict[str, ThresholdSpec] | None = None,
    actions: dict[str, str] | None = None,
    baseline_bins: list[float] | None = None,
    n_bins: int = DEFAULT_N_BINS,
) -> KpiSnapshot:
    """Windowed KPI snapshot; a pure function of the event log and window.

    Sparse KPIs are reported absent, never fabricated; an empty window is
    overall green with the insufficient-data flag set.
    """
    if window_end <= window_start:
        raise ValueError("window_end must be after window_start")
    thresholds = thresholds if thresholds is not None else DEFAULT_THRESHOLDS
    in_window = [e for e in events if window_start <= e.timestamp < window_end]

    def mean_of(kind: EventKind) -> float | None:
        vals = [e.value for e in in_window if e.kind is kind]
        return sum(vals) / len(vals) if vals else None

    attempts = sum(e.kind is EventKind.ATTEMPT for e in in_window)
    successes = sum(e.kind is EventKind.SUCCESS for e in in_window)
    success_ratio = successes / attempts if attempts else None

    drift = None
    bins = [e.bin for e in in_window if e.kind is EventKind.QUERY_EMBEDDING_BIN]
    if bins and baseline_bins:
        counts = [0] * len(baseline_bins)
        for b in bins:
            if b >= len(baseline_bins):
                raise BinMismatch(f"bin {b} outside baseline with {len(baseline_bins)} bins")
            counts[b] += 1
        total = sum(counts)
        drift = psi(baseline_bins, [c / total for c in counts])

    values = {
        "success_ratio": success_ratio,
        "mean_toxicity": mean_of(EventKind.TOXICITY_SCORE),
        "mean_hallucination": mean_of(EventKind.HALLUCINATION_SCORE),
        "mean_feedback": mean_of(EventKind.FEEDBACK),
        "drift_psi": drift,
    }
    present = {k: v for k, v in values.items() if v is not None}
    per_kpi, overall, triggered = evaluate_status(present, thresholds, actions)
    return KpiSnapshot(
        window_start=window_start,
        window_end=window_end,
        success_ratio=success_ratio,
        mean_toxicity=values["mean_toxicity"],
        mean_hallucination=values["mean_hallucination"],
        mean_feedback=values["mean_feedback"],
        drift_psi=drift,
        per_kpi_status=per_kpi,
        overall=overall,
        actions=triggered,
        attempts=attempts,
        insufficient_data=not present,
    )


def snapshot_to_dict(s: KpiSnapshot) -> dict:
    return {
        "window": {"start": s.window_start.isoformat(), "end": s.window_end.isoformat()},
        "success_ratio": s.success_ratio,
        "mean_toxicity": s.mean_toxicity,
        "mean_hallucination": s.mean_hallucination,
        "mean_feedback": s.mean_feedback,
        "drift_psi": s.drift_psi,
        "per_kpi_status": {k: v.value for k, v in s.per_kpi_status.items()},
        "overall": s.overall.value,
        "actions": list(s.actions),
        "attempts": s.attempts,
        "insufficient_data": s.insufficient_data,
    }


def build_drift_baseline(
    queries: list[str],
    embed_endpoint,
    k: int = DEFAULT_N_BINS,
    seed: int = 0,
) -> tuple[list[list[float]], list[float]]:
    """Freeze a drift baseline from a reference query population.

    Clusters the query embeddings (k bins) and returns (centroids,
    per-bin probabilities) ready for the gateway monitoring config.
    """
    from . import endpoints as ep
    from .segmentation import cluster

    vecs = ep.embed(embed_endpoint, queries)
    embeddings = {f"q{i:06d}": v for i, v in enumerate(vecs)}
    clustering = cluster(embeddings, k=k, seed=seed)
    sizes = clustering.sizes()
    total = sum(sizes)
    return (
        [[float(x) for x in c] for c in clustering.centroids],
        [s / total for s in sizes],
    )


def parse_window(window: str | None, default_hours: int) -> int:
    """'36h' / '90m' / plain hours -> whole hours (minimum 1)."""
    if not window:
        return default_hours
    text = window.strip().lower()
    if text.endswith("h"):
        return max(1, int(text[:-1]))
    if text.endswith("m"):
        return max(1, round(int(text[:-1]) / 60))
    return max(1, int(text))


def now_utc() -> datetime:
    return datetime.now(timezone.utc)
