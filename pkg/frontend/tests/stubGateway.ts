// In-memory stand-in for the gateway HTTP API. Implements the routes the
// console consumes, enforces the single-transition rule, and records every
// mutating call so contract tests can count them.

import type { FetchLike } from '../src/api.js';
import type { HeldItemView, KpiSnapshot } from '../src/types.js';

export interface DecisionCall {
  requestId: string;
  decision: string;
  reviewerId: string;
  headerReviewer: string | null;
}

export interface StubGateway {
  fetchFn: FetchLike;
  decisions: DecisionCall[];
  items: Map<string, HeldItemView>;
  setSnapshot(snapshot: KpiSnapshot): void;
  failNextFetches(n: number): void;
}

export function pendingItem(requestId: string, text = 'held response text'): HeldItemView {
  return {
    request_id: requestId,
    response_text: text,
    created_at: '2026-08-11T00:00:00+00:00',
    age_s: 90,
    state: 'pending',
    reviewer_id: null,
    decided_at: null,
  };
}

export function greenSnapshot(overrides: Partial<KpiSnapshot> = {}): KpiSnapshot {
  return {
    window: { start: '2026-08-10T00:00:00+00:00', end: '2026-08-11T00:00:00+00:00' },
    success_ratio: 0.99,
    mean_toxicity: 0.01,
    mean_hallucination: 0.05,
    mean_feedback: 4.6,
    drift_psi: 0.02,
    per_kpi_status: {
      success_ratio: 'green',
      mean_toxicity: 'green',
      mean_hallucination: 'green',
      mean_feedback: 'green',
      drift_psi: 'green',
    },
    overall: 'green',
    actions: [],
    attempts: 120,
    insufficient_data: false,
    thresholds: {
      mean_toxicity: { amber: 0.2, red: 0.5, higher_is_worse: true },
      drift_psi: { amber: 0.1, red: 0.25, higher_is_worse: true },
    },
    ...overrides,
  };
}

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

export function createStubGateway(items: HeldItemView[] = []): StubGateway {
  const store = new Map(items.map((i) => [i.request_id, { ...i }]));
  const decisions: DecisionCall[] = [];
  let snapshot = greenSnapshot();
  let failuresLeft = 0;

  const fetchFn: FetchLike = async (input, init) => {
    if (failuresLeft > 0) {
      failuresLeft -= 1;
      throw new TypeError('network down');
    }
    const url = new URL(input, 'http://stub.test');
    const decisionMatch = url.pathname.match(/^\/v1\/held\/([^/]+)\/decision$/);
    if (decisionMatch && init?.method === 'POST') {
      const requestId = decisionMatch[1];
      const body = JSON.parse(String(init.body)) as { decision: string; reviewer_id: string };
      const headers = new Headers(init.headers);
      decisions.push({
        requestId,
        decision: body.decision,
        reviewerId: body.reviewer_id,
        headerReviewer: headers.get('X-Reviewer-Id'),
      });
      const item = store.get(requestId);
      if (!item) return json({ detail: `no held item ${requestId}` }, 404);
      if (item.state !== 'pending') {
        return json({ detail: `held item ${requestId} is already ${item.state}` }, 409);
      }
      item.state = body.decision === 'approve' ? 'approved' : 'rejected';
      item.reviewer_id = body.reviewer_id;
      item.decided_at = '2026-08-11T00:05:00+00:00';
      return json(item);
    }
    if (url.pathname === '/v1/held') {
      const state = url.searchParams.get('state');
      const all = [...store.values()];
      return json({ items: state ? all.filter((i) => i.state === state) : all });
    }
    if (url.pathname === '/v1/kpis') {
      return json(snapshot);
    }
    return json({ detail: `no stub route for ${url.pathname}` }, 404);
  };

  return {
    fetchFn,
    decisions,
    items: store,
    setSnapshot: (s) => {
      snapshot = s;
    },
    failNextFetches: (n) => {
      failuresLeft = n;
    },
  };
}
