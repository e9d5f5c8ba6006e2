/** Scenario store and the what-if comparison flow.
 *
 * Scenarios live only in memory (nothing is persisted).  Requests carry a
 * per-scenario sequence number: responses for anything but the latest
 * sequence are discarded, and an identical request already in flight is
 * not sent again. */

import type { PredictionApi } from "./api.js";
import type {
  Anchor, Profile, RiskEstimate, Scenario, WhatifResponse,
} from "./types.js";

export function requestKey(scenario: Scenario): string {
  const ordered = Object.keys(scenario.profile).sort()
    .map((k) => [k, scenario.profile[k]]);
  return JSON.stringify([ordered, scenario.anchor, scenario.a, scenario.b]);
}

export class ScenarioStore {
  scenarios: Scenario[] = [];
  private nextId = 1;
  private nextSeq = 1;
  private latest = new Map<number, number>();
  private inflight = new Map<number, string>();

  add(profile: Profile, anchor: Anchor, a: number, b: number, label?: string): Scenario {
    const scenario: Scenario = {
      id: this.nextId++,
      label: label ?? `scenario ${this.nextId - 1}`,
      profile: { ...profile },
      anchor, a, b,
      estimate: null,
    };
    this.scenarios.push(scenario);
    return scenario;
  }

  clone(id: number): Scenario {
    const source = this.get(id);
    return this.add(source.profile, source.anchor, source.a, source.b,
      `${source.label} (copy)`);
  }

  get(id: number): Scenario {
    const found = this.scenarios.find((s) => s.id === id);
    if (!found) throw new Error(`no scenario ${id}`);
    return found;
  }

  update(id: number, patch: Partial<Pick<Scenario, "label" | "anchor" | "a" | "b">> &
    { profile?: Profile }): Scenario {
    const scenario = this.get(id);
    if (patch.profile) scenario.profile = { ...scenario.profile, ...patch.profile };
    if (patch.label !== undefined) scenario.label = patch.label;
    if (patch.anchor !== undefined) scenario.anchor = patch.anchor;
    if (patch.a !== undefined) scenario.a = patch.a;
    if (patch.b !== undefined) scenario.b = patch.b;
    scenario.estimate = null; // stale numbers must never be displayed
    return scenario;
  }

  remove(id: number): void {
    this.scenarios = this.scenarios.filter((s) => s.id !== id);
    this.latest.delete(id);
    this.inflight.delete(id);
  }

  /** Returns a sequence token, or null when this exact request is
   * already in flight for the scenario. */
  beginRequest(id: number, key: string): number | null {
    if (this.inflight.get(id) === key) return null;
    const seq = this.nextSeq++;
    this.latest.set(id, seq);
    this.inflight.set(id, key);
    return seq;
  }

  /** Applies the estimate only when the token is still the latest.
   * Returns whether the response was accepted. */
  settleRequest(id: number, seq: number, estimate: RiskEstimate | null): boolean {
    if (this.latest.get(id) !== seq) return false;
    this.inflight.delete(id);
    const scenario = this.scenarios.find((s) => s.id === id);
    if (scenario && estimate !== null) scenario.estimate = estimate;
    return true;
  }
}

export interface WhatifRequest {
  base: Profile;
  deltas: Profile[];
  a: number;
  b: number;
  anchor: Anchor;
}

export type WhatifPlan = { request: WhatifRequest } | { error: string };

/** Builds the single /v1/whatif call covering every scenario, or a
 * validation message when the scenarios are not comparable. */
export function buildWhatifRequest(scenarios: Scenario[]): WhatifPlan {
  if (scenarios.length === 0) return { error: "nothing to compare" };
  const first = scenarios[0]!;
  for (const s of scenarios.slice(1)) {
    if (s.anchor !== first.anchor) {
      return { error: "scenarios mix prediction anchors; align them first" };
    }
    if (s.a !== first.a || s.b !== first.b) {
      return { error: "scenarios cover different age windows; align them first" };
    }
  }
  const deltas = scenarios.slice(1).map((s) => {
    const delta: Profile = {};
    for (const [name, value] of Object.entries(s.profile)) {
      if (first.profile[name] !== value) delta[name] = value;
    }
    return delta;
  });
  return {
    request: {
      base: first.profile, deltas, a: first.a, b: first.b, anchor: first.anchor,
    },
  };
}

export interface ComparisonRow {
  label: string;
  fiveYear: number | null;
  fifteenYear: number | null;
  horizonRisk: number;
  estimate: RiskEstimate;
}

function curveValueAt(estimate: RiskEstimate, age: number): number | null {
  const point = estimate.per_year_curve.find((p) => p.age === age);
  return point ? point.risk : null;
}

/** Tabulates 5- and 15-year risks straight off the returned curves and
 * sorts rows by the 5-year risk, highest first. */
export function comparisonTable(scenarios: Scenario[]): ComparisonRow[] {
  const rows: ComparisonRow[] = [];
  for (const s of scenarios) {
    if (!s.estimate) continue;
    rows.push({
      label: s.label,
      fiveYear: curveValueAt(s.estimate, s.a + 5),
      fifteenYear: curveValueAt(s.estimate, s.a + 15),
      horizonRisk: s.estimate.mean_risk,
      estimate: s.estimate,
    });
  }
  rows.sort((x, y) => (y.fiveYear ?? -1) - (x.fiveYear ?? -1));
  return rows;
}

export interface ComparisonResult {
  rows: ComparisonRow[];
  calls: number;
}

/** Runs the comparison with exactly one service call and distributes the
 * estimates back onto the scenarios in request order. */
export async function compareScenarios(
  api: PredictionApi,
  store: ScenarioStore,
  ids: number[],
): Promise<ComparisonResult> {
  const scenarios = ids.map((id) => store.get(id));
  const plan = buildWhatifRequest(scenarios);
  if ("error" in plan) throw new Error(plan.error);
  const { base, deltas, a, b, anchor } = plan.request;
  const response: WhatifResponse = await api.whatif(base, deltas, a, b, anchor);
  if (response.estimates.length !== scenarios.length) {
    throw new Error("service returned an unexpected number of estimates");
  }
  response.estimates.forEach((entry, i) => {
    const scenario = scenarios[i]!;
    const seq = store.beginRequest(scenario.id, `whatif:${requestKey(scenario)}`);
    if (seq !== null) store.settleRequest(scenario.id, seq, entry.estimate);
  });
  return { rows: comparisonTable(scenarios), calls: 1 };
}
