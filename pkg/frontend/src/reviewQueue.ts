import { ApiError, GatewayClient } from './api.js';
import type { HeldItemView } from './types.js';

function formatAge(seconds: number): string {
  if (seconds < 60) return `${seconds}s`;
  if (seconds < 3600) return `${Math.floor(seconds / 60)}m`;
  return `${Math.floor(seconds / 3600)}h ${Math.floor((seconds % 3600) / 60)}m`;
}

/**
 * Held-output review queue.
 *
 * Decisions are optimistic (the row greys out immediately) but the queue
 * always reconciles with the server afterwards, and any 404/409 from the
 * gateway is rendered on the row rather than swallowed, so a reviewer who
 * loses a race sees the server's answer.
 */
export class ReviewQueue {
  private busy = new Set<string>();

  constructor(
    private readonly container: HTMLElement,
    private readonly client: GatewayClient,
    private readonly reviewerId: () => string,
    private readonly onChange: () => void = () => {},
  ) {
    this.container.innerHTML = `
      <div class="queue-status" data-testid="queue-status"></div>
      <div class="queue-error" data-testid="queue-error" hidden></div>
      <div class="row-error" data-testid="decision-notice" hidden></div>
      <ul class="queue-list" data-testid="queue-list"></ul>
    `;
  }

  async refresh(): Promise<void> {
    let items: HeldItemView[];
    try {
      items = await this.client.listHeld('pending');
    } catch (err) {
      this.showError(`Could not load the review queue: ${(err as Error).message}`);
      return;
    }
    this.showError(null);
    this.render(items);
  }

  private showError(message: string | null): void {
    const banner = this.container.querySelector<HTMLElement>('[data-testid="queue-error"]')!;
    banner.hidden = message === null;
    banner.textContent = message ?? '';
  }

  // decision outcomes outlive the reconciling re-render: the notice stays
  // up until the reviewer's next decision attempt
  private showNotice(message: string | null): void {
    const notice = this.container.querySelector<HTMLElement>('[data-testid="decision-notice"]')!;
    notice.hidden = message === null;
    notice.textContent = message ?? '';
  }

  private render(items: HeldItemView[]): void {
    const status = this.container.querySelector<HTMLElement>('[data-testid="queue-status"]')!;
    const list = this.container.querySelector<HTMLElement>('[data-testid="queue-list"]')!;
    list.textContent = '';
    if (items.length === 0) {
      status.textContent = 'No items awaiting review.';
      status.dataset.empty = 'true';
      return;
    }
    status.textContent = `${items.length} item(s) awaiting review`;
    status.dataset.empty = 'false';
    for (const item of items) {
      list.appendChild(this.renderRow(item));
    }
  }

  private renderRow(item: HeldItemView): HTMLElement {
    const row = document.createElement('li');
    row.className = 'held-item';
    row.dataset.requestId = item.request_id;

    const meta = document.createElement('div');
    meta.className = 'held-meta';
    meta.textContent = `${item.request_id} (held ${formatAge(item.age_s)})`;
    row.appendChild(meta);

    // response_text is rendered verbatim via textContent: the console never
    // rewrites what the reviewer approves
    const text = document.createElement('pre');
    text.className = 'response-text';
    text.textContent = item.response_text;
    row.appendChild(text);

    const controls = document.createElement('div');
    controls.className = 'held-controls';
    for (const decision of ['approve', 'reject'] as const) {
      const button = document.createElement('button');
      button.dataset.action = decision;
      button.textContent = decision === 'approve' ? 'Approve' : 'Reject';
      button.addEventListener('click', () => void this.decide(item.request_id, decision, row));
      controls.appendChild(button);
    }
    row.appendChild(controls);

    const error = document.createElement('div');
    error.className = 'row-error';
    error.dataset.testid = 'row-error';
    error.hidden = true;
    row.appendChild(error);
    return row;
  }

  private async decide(
    requestId: string,
    decision: 'approve' | 'reject',
    row: HTMLElement,
  ): Promise<void> {
    if (this.busy.has(requestId)) return;
    this.busy.add(requestId);
    this.showNotice(null);
    row.classList.add('submitting');
    row.querySelectorAll('button').forEach((b) => (b.disabled = true));
    try {
      await this.client.decide(requestId, decision, this.reviewerId());
    } catch (err) {
      const message =
        err instanceof ApiError && err.status === 409
          ? `Already decided: ${err.message}`
          : `Decision failed on ${requestId}: ${(err as Error).message}`;
      this.showNotice(message);
      const rowError = row.querySelector<HTMLElement>('[data-testid="row-error"]')!;
      rowError.hidden = false;
      rowError.textContent = message;
    } finally {
      this.busy.delete(requestId);
    }
    await this.refresh(); // reconcile optimistic state with the server
    this.onChange();
  }
}
