/** Pure view-model builders for the risk chart and comparison table.
 *
 * These functions do no risk arithmetic: every number they expose comes
 * verbatim from a service response field, and only pixel coordinates are
 * computed here.  Component tests assert that traceability. */

import type { RiskEstimate, Scenario } from "./types.js";

export interface ChartPoint {
  x: number;
  y: number;
  age: number;
  risk: number;
  criLow: number;
  criHigh: number;
}

export interface ChartModel {
  width: number;
  height: number;
  linePath: string;
  bandPath: string;
  points: ChartPoint[];
  yMax: number;
  xTicks: { x: number; label: string }[];
  yTicks: { y: number; label: string }[];
}

const MARGIN = { left: 46, right: 12, top: 10, bottom: 26 };

function scaleFactory(a: number, b: number, yMax: number,
                      width: number, height: number) {
  const innerW = width - MARGIN.left - MARGIN.right;
  const innerH = height - MARGIN.top - MARGIN.bottom;
  const span = Math.max(b - a, 1e-9);
  return {
    x: (age: number) => MARGIN.left + ((age - a) / span) * innerW,
    y: (risk: number) => MARGIN.top + innerH * (1 - risk / yMax),
  };
}

/** Highest credible bound across scenarios, padded; shared so overlaid
 * curves are directly comparable. */
export function sharedYMax(estimates: RiskEstimate[]): number {
  let top = 0;
  for (const est of estimates) {
    for (const p of est.per_year_curve) top = Math.max(top, p.cri_high);
    top = Math.max(top, est.cri_high);
  }
  return top === 0 ? 0.01 : Math.min(1, top * 1.15);
}

export function riskCurveModel(
  estimate: RiskEstimate,
  a: number,
  b: number,
  width = 640,
  height = 300,
  yMax?: number,
): ChartModel {
  const top = yMax ?? sharedYMax([estimate]);
  const { x, y } = scaleFactory(a, b, top, width, height);
  const points: ChartPoint[] = estimate.per_year_curve.map((p) => ({
    x: x(p.age),
    y: y(p.risk),
    age: p.age,
    risk: p.risk,
    criLow: p.cri_low,
    criHigh: p.cri_high,
  }));

  // the drawn line anchors at (a, 0): risk over an empty interval is zero
  const lineCoords = [`${x(a)},${y(0)}`,
    ...points.map((p) => `${p.x},${p.y}`)];
  const linePath = "M" + lineCoords.join(" L");

  let bandPath = "";
  if (points.length > 0) {
    const upper = [`${x(a)},${y(0)}`,
      ...points.map((p) => `${p.x},${y(p.criHigh)}`)];
    const lower = [...points.map((p) => `${p.x},${y(p.criLow)}`).reverse(),
      `${x(a)},${y(0)}`];
    bandPath = "M" + upper.join(" L") + " L" + lower.join(" L") + " Z";
  }

  const xTicks = [];
  const step = Math.max(1, Math.round((b - a) / 8));
  for (let age = Math.ceil(a); age <= b; age += step) {
    xTicks.push({ x: x(age), label: String(age) });
  }
  const yTicks = [0, 0.25, 0.5, 0.75, 1].map((f) => ({
    y: y(f * top),
    label: formatPercent(f * top, 1),
  }));
  return { width, height, linePath, bandPath, points, yMax: top, xTicks, yTicks };
}

export function overlayModels(
  scenarios: Scenario[],
  width = 640,
  height = 300,
): Map<number, ChartModel> {
  const withEstimates = scenarios.filter((s) => s.estimate !== null);
  const yMax = sharedYMax(withEstimates.map((s) => s.estimate!));
  const out = new Map<number, ChartModel>();
  for (const s of withEstimates) {
    out.set(s.id, riskCurveModel(s.estimate!, s.a, s.b, width, height, yMax));
  }
  return out;
}

/** Display formatting used everywhere a risk is shown. */
export function formatPercent(value: number | null, decimals = 2): string {
  if (value === null) return "–";
  return (value * 100).toFixed(decimals) + "%";
}

export interface TableCellRow {
  label: string;
  fiveYear: string;
  fifteenYear: string;
  horizon: string;
  interval: string;
}

/** Stringifies comparison rows; numbers pass through formatPercent only. */
export function tableCells(
  rows: { label: string; fiveYear: number | null; fifteenYear: number | null;
          horizonRisk: number; estimate: RiskEstimate }[],
): TableCellRow[] {
  return rows.map((row) => ({
    label: row.label,
    fiveYear: formatPercent(row.fiveYear),
    fifteenYear: formatPercent(row.fifteenYear),
    horizon: formatPercent(row.horizonRisk),
    interval: `(${formatPercent(row.estimate.cri_low)}, ${formatPercent(row.estimate.cri_high)})`,
  }));
}
