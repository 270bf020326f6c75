import { GatewayClient } from './api.js';
import type { KpiSnapshot, ThresholdAnnotation } from './types.js';
import { KPI_NAMES } from './types.js';

const TREND_CAP = 48;

function thresholdNote(t: ThresholdAnnotation | undefined): string {
  if (!t) return '';
  const cmp = t.higher_is_worse ? '>=' : '<=';
  return ` (amber ${cmp} ${t.amber}, red ${cmp} ${t.red})`;
}

function sparkline(values: number[], width = 120, height = 24): string {
  if (values.length < 2) return '';
  const max = Math.max(...values, 1e-9);
  const step = width / (values.length - 1);
  const points = values
    .map((v, i) => `${(i * step).toFixed(1)},${(height - (v / max) * height).toFixed(1)}`)
    .join(' ');
  return (
    `<svg class="trend" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">` +
    `<polyline fill="none" stroke="currentColor" stroke-width="1.5" points="${points}"/></svg>`
  );
}

/**
 * KPI traffic-light dashboard.
 *
 * Every color and action key comes from the server's snapshot; the console
 * does no thresholding of its own. On fetch failure the last good snapshot
 * stays up behind a stale-data banner carrying its timestamp.
 */
export class KpiDashboard {
  private lastGoodAt: Date | null = null;
  private driftTrend: number[] = [];

  constructor(
    private readonly container: HTMLElement,
    private readonly client: GatewayClient,
  ) {
    this.container.innerHTML = `
      <div class="stale-banner" data-testid="stale-banner" hidden></div>
      <div class="overall" data-testid="overall"></div>
      <div class="actions-banner" data-testid="actions" hidden></div>
      <ul class="kpi-list" data-testid="kpi-list"></ul>
      <div class="drift-trend" data-testid="drift-trend"></div>
    `;
  }

  async refresh(): Promise<void> {
    let snapshot: KpiSnapshot;
    try {
      snapshot = await this.client.kpis();
    } catch {
      this.renderStale();
      return;
    }
    this.lastGoodAt = new Date();
    if (snapshot.drift_psi !== null) {
      this.driftTrend.push(snapshot.drift_psi);
      if (this.driftTrend.length > TREND_CAP) this.driftTrend.shift();
    }
    this.render(snapshot);
  }

  private banner(): HTMLElement {
    return this.container.querySelector<HTMLElement>('[data-testid="stale-banner"]')!;
  }

  private renderStale(): void {
    const banner = this.banner();
    banner.hidden = false;
    banner.textContent = this.lastGoodAt
      ? `Gateway unreachable; showing data from ${this.lastGoodAt.toISOString()}`
      : 'Gateway unreachable; no data received yet';
    // the previous snapshot, if any, stays rendered untouched
  }

  private render(snapshot: KpiSnapshot): void {
    this.banner().hidden = true;

    const overall = this.container.querySelector<HTMLElement>('[data-testid="overall"]')!;
    overall.dataset.light = snapshot.overall;
    overall.textContent = snapshot.insufficient_data
      ? `overall: ${snapshot.overall} (insufficient data in window)`
      : `overall: ${snapshot.overall}`;

    const actions = this.container.querySelector<HTMLElement>('[data-testid="actions"]')!;
    if (snapshot.actions.length > 0) {
      actions.hidden = false;
      actions.textContent = `Action plans triggered: ${snapshot.actions.join(', ')}`;
    } else {
      actions.hidden = true;
      actions.textContent = '';
    }

    const list = this.container.querySelector<HTMLElement>('[data-testid="kpi-list"]')!;
    list.textContent = '';
    for (const name of KPI_NAMES) {
      const value = snapshot[name];
      if (value === null || value === undefined) continue;
      const light = snapshot.per_kpi_status[name] ?? 'green';
      const li = document.createElement('li');
      li.dataset.kpi = name;
      li.dataset.light = light;
      const dot = document.createElement('span');
      dot.className = `dot ${light}`;
      li.appendChild(dot);
      const label = document.createElement('span');
      label.textContent = ` ${name}: ${value.toFixed(4)}${thresholdNote(
        snapshot.thresholds?.[name],
      )}`;
      li.appendChild(label);
      list.appendChild(li);
    }

    const trend = this.container.querySelector<HTMLElement>('[data-testid="drift-trend"]')!;
    trend.innerHTML =
      this.driftTrend.length >= 2
        ? `drift PSI trend (${this.driftTrend.length} windows): ${sparkline(this.driftTrend)}`
        : '';
  }
}
