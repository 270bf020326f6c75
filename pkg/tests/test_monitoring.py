import math
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrm.monitoring import (
    DEFAULT_ACTIONS,
    DEFAULT_THRESHOLDS,
    BinMismatch,
    EventKind,
    InvalidEvent,
    KpiEvent,
    KpiStore,
    MissingThreshold,
    Status,
    ThresholdSpec,
    compute_kpis,
    evaluate_status,
    psi,
)

T0 = datetime(2026, 1, 1, tzinfo=timezone.utc)


def ev(kind, minutes=0, value=None, bin=None):
    return KpiEvent(timestamp=T0 + timedelta(minutes=minutes), kind=kind, value=value, bin=bin)


# --- psi -----------------------------------------------------------------------

def test_psi_identical_distributions():
    assert psi([0.5, 0.5], [0.5, 0.5]) == 0.0


def test_psi_direct_formula_oracle():
    # (0.9-0.1)ln(9) + (0.1-0.9)ln(1/9) = 1.6 ln 9
    expected = 1.6 * math.log(9.0)
    assert psi([0.9, 0.1], [0.1, 0.9]) == pytest.approx(expected, abs=1e-12)
    assert psi([0.9, 0.1], [0.1, 0.9]) == pytest.approx(3.5155, abs=1e-3)


def test_psi_zero_bins_smoothed():
    assert psi([1.0, 0.0], [1.0, 0.0]) == 0.0
    one_sided = psi([1.0, 0.0], [0.5, 0.5])
    assert math.isfinite(one_sided) and one_sided > 0


def test_psi_bin_mismatch():
    with pytest.raises(BinMismatch):
        psi([0.5, 0.5], [0.2, 0.3, 0.5])
    with pytest.raises(BinMismatch):
        psi([1.0], [1.0])


def test_psi_requires_probabilities():
    with pytest.raises(ValueError):
        psi([0.9, 0.3], [0.5, 0.5])


@given(
    st.lists(st.floats(0.001, 1.0), min_size=2, max_size=8),
    st.lists(st.floats(0.001, 1.0), min_size=2, max_size=8),
)
@settings(max_examples=60)
def test_psi_properties(raw_p, raw_q):
    size = min(len(raw_p), len(raw_q))
    p = [v / sum(raw_p[:size]) for v in raw_p[:size]]
    q = [v / sum(raw_q[:size]) for v in raw_q[:size]]
    assert psi(p, p) == 0.0
    assert psi(p, q) >= 0.0
    assert psi(p, q) == pytest.approx(psi(q, p), abs=1e-12)


# --- events ---------------------------------------------------------------------

def test_feedback_out_of_range_rejected():
    with pytest.raises(InvalidEvent):
        ev(EventKind.FEEDBACK, value=6.0)


def test_score_events_require_unit_interval():
    with pytest.raises(InvalidEvent):
        ev(EventKind.TOXICITY_SCORE, value=1.5)


def test_store_round_trip(tmp_path):
    path = tmp_path / "events.jsonl"
    store = KpiStore(path)
    store.record_event(ev(EventKind.ATTEMPT))
    store.record_event(ev(EventKind.SUCCESS, minutes=1))
    store.record_event(ev(EventKind.FEEDBACK, minutes=2, value=4.5))
    reloaded = KpiStore(path)
    assert reloaded.events() == store.events()


def test_out_of_order_timestamps_accepted(tmp_path):
    store = KpiStore(tmp_path / "e.jsonl")
    store.record_event(ev(EventKind.ATTEMPT, minutes=10))
    store.record_event(ev(EventKind.ATTEMPT, minutes=1))
    snap = compute_kpis(store.events(), T0, T0 + timedelta(minutes=5))
    assert snap.attempts == 1  # windowing by timestamp, not arrival order


# --- compute_kpis ------------------------------------------------------------------

def _window(minutes=60):
    return T0, T0 + timedelta(minutes=minutes)


def test_success_ratio_arithmetic():
    events = [ev(EventKind.ATTEMPT, i) for i in range(10)]
    events += [ev(EventKind.SUCCESS, i) for i in range(8)]
    snap = compute_kpis(events, *_window())
    assert snap.success_ratio == pytest.approx(0.8)


def test_empty_window_is_green_by_vacuity():
    snap = compute_kpis([], *_window())
    assert snap.overall is Status.GREEN
    assert snap.insufficient_data
    assert snap.success_ratio is None
    assert snap.actions == ()


def test_drift_zero_when_window_matches_baseline():
    baseline = [0.5, 0.3, 0.2]
    events = []
    for b, count in enumerate((5, 3, 2)):
        events += [ev(EventKind.QUERY_EMBEDDING_BIN, i, bin=b) for i in range(count)]
    snap = compute_kpis(events, *_window(), baseline_bins=baseline)
    assert snap.drift_psi == 0.0


def test_snapshot_recomputation_identical(tmp_path):
    path = tmp_path / "events.jsonl"
    store = KpiStore(path)
    for i in range(5):
        store.record_event(ev(EventKind.ATTEMPT, i))
        store.record_event(ev(EventKind.SUCCESS, i, ))
        store.record_event(ev(EventKind.TOXICITY_SCORE, i, value=0.05 * i))
    snap_a = compute_kpis(store.events(), *_window())
    snap_b = compute_kpis(KpiStore(path).events(), *_window())
    assert snap_a == snap_b


# --- statuses ------------------------------------------------------------------------

def test_threshold_orientation_validation():
    with pytest.raises(ValueError):
        ThresholdSpec(amber=0.5, red=0.3, higher_is_worse=True)
    with pytest.raises(ValueError):
        ThresholdSpec(amber=0.5, red=0.7, higher_is_worse=False)


def test_all_green_no_actions():
    per_kpi, overall, actions = evaluate_status(
        {"mean_toxicity": 0.01, "success_ratio": 0.99}, DEFAULT_THRESHOLDS
    )
    assert overall is Status.GREEN
    assert actions == ()


def test_one_red_dominates_and_emits_action():
    per_kpi, overall, actions = evaluate_status(
        {"mean_toxicity": 0.9, "success_ratio": 0.99}, DEFAULT_THRESHOLDS
    )
    assert per_kpi["mean_toxicity"] is Status.RED
    assert overall is Status.RED
    assert DEFAULT_ACTIONS["mean_toxicity"] in actions


def test_value_exactly_at_amber_bound_is_amber():
    thresholds = {"mean_toxicity": ThresholdSpec(amber=0.2, red=0.5)}
    per_kpi, overall, _ = evaluate_status({"mean_toxicity": 0.2}, thresholds)
    assert per_kpi["mean_toxicity"] is Status.AMBER


def test_lower_is_worse_orientation():
    thresholds = {"success_ratio": ThresholdSpec(amber=0.95, red=0.85, higher_is_worse=False)}
    assert evaluate_status({"success_ratio": 0.9}, thresholds)[0]["success_ratio"] is Status.AMBER
    assert evaluate_status({"success_ratio": 0.5}, thresholds)[0]["success_ratio"] is Status.RED


def test_missing_threshold_raises():
    with pytest.raises(MissingThreshold):
        evaluate_status({"mystery_kpi": 1.0}, DEFAULT_THRESHOLDS)


def test_worsening_one_kpi_never_improves_overall():
    rank = {Status.GREEN: 0, Status.AMBER: 1, Status.RED: 2}
    base = {"mean_toxicity": 0.1, "success_ratio": 0.99}
    _, overall_before, _ = evaluate_status(base, DEFAULT_THRESHOLDS)
    for worse in (0.2, 0.35, 0.6, 0.95):
        _, overall_after, _ = evaluate_status(
            {**base, "mean_toxicity": worse}, DEFAULT_THRESHOLDS
        )
        assert rank[overall_after] >= rank[overall_before]
        overall_before = overall_after


# --- drift baseline + window parsing ----------------------------------------------

def test_build_drift_baseline_round_trip():
    from mrm.monitoring import build_drift_baseline
    from mrm.types import EndpointKind, EndpointSpec

    embedder = EndpointSpec(
        id="emb", kind=EndpointKind.EMBEDDING, mock_script={"behavior": "hash_bow"}
    )
    queries = [f"refund window question {i}" for i in range(6)]
    queries += [f"branch opening hours {i}" for i in range(6)]
    centroids, bins = build_drift_baseline(queries, embedder, k=2, seed=3)
    assert len(centroids) == 2
    assert len(bins) == 2
    assert sum(bins) == pytest.approx(1.0)
    assert all(b > 0 for b in bins)


def test_parse_window_formats():
    from mrm.monitoring import parse_window

    assert parse_window(None, 24) == 24
    assert parse_window("36h", 24) == 36
    assert parse_window("90m", 24) == 2
    assert parse_window("12", 24) == 12
