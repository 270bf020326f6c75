#!/usr/bin/env python3
"""Replay a synthetic day of gateway traffic into the KPI engine and print
the traffic-light snapshot, including a drifted query distribution.

Usage: python3 scripts/run_kpi_demo.py
"""

import random
from datetime import datetime, timedelta, timezone

from mrm.monitoring import (
    DEFAULT_ACTIONS,
    DEFAULT_THRESHOLDS,
    EventKind,
    KpiEvent,
    compute_kpis,
)

T0 = datetime(2026, 8, 10, tzinfo=timezone.utc)
BASELINE_BINS = [0.4, 0.3, 0.2, 0.1]


def synthetic_day(rng):
    events = []
    for minute in range(0, 24 * 60, 2):
        ts = T0 + timedelta(minutes=minute)
        events.append(KpiEvent(ts, EventKind.ATTEMPT))
        if rng.random() < 0.92:
            events.append(KpiEvent(ts, EventKind.SUCCESS))
        events.append(KpiEvent(ts, EventKind.TOXICITY_SCORE, value=min(1.0, rng.random() * 0.1)))
        if rng.random() < 0.3:
            events.append(KpiEvent(ts, EventKind.FEEDBACK, value=rng.choice([3, 4, 4, 5])))
        # drifted traffic: bin 3 is now twice its baseline share
        bin_idx = rng.choices(range(4), weights=[0.35, 0.25, 0.2, 0.2])[0]
        events.append(KpiEvent(ts, EventKind.QUERY_EMBEDDING_BIN, bin=bin_idx))
    return events


def main():
    rng = random.Random(2026)
    snapshot = compute_kpis(
        synthetic_day(rng),
        T0,
        T0 + timedelta(hours=24),
        thresholds=DEFAULT_THRESHOLDS,
        actions=DEFAULT_ACTIONS,
        baseline_bins=BASELINE_BINS,
    )
    print(f"window: {snapshot.window_start} .. {snapshot.window_end}")
    for name, value in snapshot.values().items():
        light = snapshot.per_kpi_status[name].value
        print(f"  {name}: {value:.4f} [{light}]")
    print(f"overall: {snapshot.overall.value}")
    if snapshot.actions:
        print("actions triggered:")
        for key in snapshot.actions:
            print(f"  - {key}")


if __name__ == "__main__":
    main()
