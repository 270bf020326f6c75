import { GatewayClient } from './api.js';
import { KpiDashboard } from './dashboard.js';
import { ReviewQueue } from './reviewQueue.js';
import type { ConsoleConfig } from './types.js';

const DEFAULT_POLL_MS = 10_000;

async function loadConfig(): Promise<ConsoleConfig> {
  try {
    const resp = await fetch('./config.json');
    if (resp.ok) return (await resp.json()) as ConsoleConfig;
  } catch {
    // fall through to defaults
  }
  return { gateway_url: 'http://127.0.0.1:8080', poll_ms: DEFAULT_POLL_MS };
}

async function bootstrap(): Promise<void> {
  const config = await loadConfig();
  const client = new GatewayClient(config.gateway_url);

  const reviewerInput = document.querySelector<HTMLInputElement>('#reviewer-id')!;
  const queue = new ReviewQueue(
    document.querySelector<HTMLElement>('#review-queue')!,
    client,
    () => reviewerInput.value.trim() || 'unnamed-reviewer',
  );
  const dashboard = new KpiDashboard(
    document.querySelector<HTMLElement>('#kpi-dashboard')!,
    client,
  );

  const tick = () => {
    void queue.refresh();
    void dashboard.refresh();
  };
  tick();
  setInterval(tick, config.poll_ms || DEFAULT_POLL_MS);
}

void bootstrap();
