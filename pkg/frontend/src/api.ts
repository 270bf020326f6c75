import type { HeldItemView, HeldState, KpiSnapshot } from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Non-2xx gateway answer; status and server detail are kept for the UI. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

async function errorFrom(resp: Response): Promise<ApiError> {
  let detail = `HTTP ${resp.status}`;
  try {
    const body = (await resp.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(resp.status, detail);
}

export class GatewayClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/+$/, '') + path;
  }

  async listHeld(state?: HeldState): Promise<HeldItemView[]> {
    const query = state ? `?state=${state}` : '';
    const resp = await this.fetchFn(this.url(`/v1/held${query}`));
    if (!resp.ok) throw await errorFrom(resp);
    const body = (await resp.json()) as { items: HeldItemView[] };
    return body.items;
  }

  async decide(
    requestId: string,
    decision: 'approve' | 'reject',
    reviewerId: string,
  ): Promise<HeldItemView> {
    const resp = await this.fetchFn(this.url(`/v1/held/${requestId}/decision`), {
      method: 'POST',
      headers: {
        'Content-Type': 'application/json',
        'X-Reviewer-Id': reviewerId,
      },
      body: JSON.stringify({ decision, reviewer_id: reviewerId }),
    });
    if (!resp.ok) throw await errorFrom(resp);
    return (await resp.json()) as HeldItemView;
  }

  async kpis(): Promise<KpiSnapshot> {
    const resp = await this.fetchFn(this.url('/v1/kpis'));
    if (!resp.ok) throw await errorFrom(resp);
    return (await resp.json()) as KpiSnapshot;
  }
}
