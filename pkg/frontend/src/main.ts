/** DOM wiring for the counseling interface.
 *
 * All numbers on screen come from service responses; this layer only
 * builds controls from /v1/model/meta, keeps the scenario store in sync
 * with the inputs, and injects the rendered chart and table. */

import { ApiError, PredictionApi } from "./api.js";
import { formatPercent, overlayModels, tableCells } from "./render.js";
import {
  ScenarioStore, compareScenarios, requestKey,
} from "./scenarios.js";
import type { Anchor, ModelMeta, Scenario } from "./types.js";
import { canSubmit, scenarioErrors } from "./validate.js";

const COLORS = ["#1766a8", "#c4501d", "#2d8659", "#7b4bab", "#a8233d", "#5b6670"];

const api = new PredictionApi("");
const store = new ScenarioStore();
let meta: ModelMeta | null = null;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, attrs: Record<string, string> = {}, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function banner(message: string, retry?: () => void): void {
  const host = document.getElementById("banner")!;
  host.innerHTML = "";
  if (!message) return;
  const box = el("div", { class: "banner" }, message);
  if (retry) {
    const button = el("button", { class: "retry" }, "Retry");
    button.addEventListener("click", () => { banner(""); retry(); });
    box.appendChild(button);
  }
  host.appendChild(box);
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) {
    const payload = error.payload as { detail?: string; fields?: Record<string, string> } | null;
    if (payload?.detail) return `service: ${payload.detail}`;
    if (payload?.fields) {
      const parts = Object.entries(payload.fields).map(([k, v]) => `${k}: ${v}`);
      return `service rejected the request (${parts.join("; ")})`;
    }
    return `service error ${error.status}`;
  }
  return "prediction service unreachable";
}

function defaultProfile(modelMeta: ModelMeta): Record<string, number> {
  const profile: Record<string, number> = {};
  for (const cov of modelMeta.covariates) {
    profile[cov.name] = cov.kind === "binary"
      ? 0
      : Math.round(((cov.min + cov.max) / 2) * 100) / 100;
  }
  return profile;
}

function factorControls(scenario: Scenario, card: HTMLElement): void {
  const grid = el("div", { class: "factors" });
  for (const cov of meta!.covariates) {
    const row = el("label", { class: "factor" });
    row.appendChild(el("span", { class: "factor-name" }, cov.name));
    if (cov.kind === "binary") {
      const toggle = el("input", { type: "checkbox" }) as HTMLInputElement;
      toggle.checked = scenario.profile[cov.name] === 1;
      toggle.addEventListener("change", () => {
        store.update(scenario.id, { profile: { [cov.name]: toggle.checked ? 1 : 0 } });
        refresh();
      });
      row.appendChild(toggle);
    } else {
      const slider = el("input", {
        type: "range", min: "0", max: "1", step: "0.01",
        value: String(scenario.profile[cov.name]),
      }) as HTMLInputElement;
      const value = el("span", { class: "factor-value" },
        Number(scenario.profile[cov.name]).toFixed(2));
      // during a drag only the label updates; rebuilding the card would
      // tear the slider out from under the pointer
      slider.addEventListener("input", () => {
        store.update(scenario.id, { profile: { [cov.name]: Number(slider.value) } });
        value.textContent = Number(slider.value).toFixed(2);
      });
      slider.addEventListener("change", () => refresh());
      row.appendChild(slider);
      row.appendChild(value);
    }
    grid.appendChild(row);
  }
  card.appendChild(grid);
}

function ageControls(scenario: Scenario, card: HTMLElement): void {
  const row = el("div", { class: "ages" });

  const anchorSelect = el("select") as HTMLSelectElement;
  for (const anchor of ["at_first_use", "at_age"]) {
    anchorSelect.appendChild(el("option", { value: anchor },
      anchor === "at_first_use" ? "at first use" : "at a fixed age"));
  }
  anchorSelect.value = scenario.anchor;
  anchorSelect.addEventListener("change", () => {
    store.update(scenario.id, { anchor: anchorSelect.value as Anchor });
    refresh();
  });

  const aInput = el("input", {
    type: "number", step: "0.5", value: String(scenario.a),
  }) as HTMLInputElement;
  const hInput = el("input", {
    type: "number", step: "1", min: "0", value: String(scenario.b - scenario.a),
  }) as HTMLInputElement;
  const sync = () => {
    const a = Number(aInput.value);
    const horizon = Number(hInput.value);
    store.update(scenario.id, { a, b: a + horizon });
    refresh();
  };
  aInput.addEventListener("change", sync);
  hInput.addEventListener("change", sync);

  row.appendChild(el("span", {}, "anchor"));
  row.appendChild(anchorSelect);
  row.appendChild(el("span", {}, "age"));
  row.appendChild(aInput);
  row.appendChild(el("span", {}, "horizon (years)"));
  row.appendChild(hInput);
  card.appendChild(row);
}

async function estimateScenario(scenario: Scenario): Promise<void> {
  if (!canSubmit(scenario, meta)) return;
  const key = requestKey(scenario);
  const seq = store.beginRequest(scenario.id, key);
  if (seq === null) return; // identical request already in flight
  try {
    const estimate = await api.predict(
      scenario.profile, scenario.a, scenario.b, scenario.anchor);
    if (store.settleRequest(scenario.id, seq, estimate)) refresh();
  } catch (error) {
    store.settleRequest(scenario.id, seq, null);
    banner(describeError(error), () => void estimateScenario(scenario));
  }
}

function scenarioCard(scenario: Scenario, index: number): HTMLElement {
  const card = el("section", { class: "card" });
  const head = el("header", { class: "card-head" });
  const swatch = el("span", { class: "swatch" });
  swatch.style.background = COLORS[index % COLORS.length]!;
  head.appendChild(swatch);

  const title = el("input", { type: "text", value: scenario.label, class: "label" }) as HTMLInputElement;
  title.addEventListener("change", () => {
    store.update(scenario.id, { label: title.value });
    refresh();
  });
  head.appendChild(title);

  const cloneBtn = el("button", {}, "Clone");
  cloneBtn.addEventListener("click", () => { store.clone(scenario.id); refresh(); });
  head.appendChild(cloneBtn);

  if (store.scenarios.length > 1) {
    const removeBtn = el("button", {}, "Remove");
    removeBtn.addEventListener("click", () => { store.remove(scenario.id); refresh(); });
    head.appendChild(removeBtn);
  }
  card.appendChild(head);

  factorControls(scenario, card);
  ageControls(scenario, card);

  const errors = meta ? scenarioErrors(scenario, meta) : [];
  if (errors.length) {
    const list = el("div", { class: "errors" });
    for (const err of errors) list.appendChild(
      el("div", {}, `${err.field}: ${err.message}`));
    card.appendChild(list);
  }

  const actions = el("div", { class: "actions" });
  const submit = el("button", { class: "primary" }, "Estimate risk") as HTMLButtonElement;
  submit.disabled = !canSubmit(scenario, meta);
  submit.addEventListener("click", () => void estimateScenario(scenario));
  actions.appendChild(submit);

  if (scenario.estimate) {
    actions.appendChild(el("span", { class: "headline" },
      `risk by age ${scenario.b}: ${formatPercent(scenario.estimate.mean_risk)} ` +
      `(${formatPercent(scenario.estimate.cri_low)}–${formatPercent(scenario.estimate.cri_high)})`));
  }
  card.appendChild(actions);
  return card;
}

function drawChart(): void {
  const host = document.getElementById("chart")!;
  host.innerHTML = "";
  const models = overlayModels(store.scenarios);
  if (models.size === 0) {
    host.appendChild(el("p", { class: "hint" },
      "Estimate a scenario to see its cumulative risk curve."));
    return;
  }
  const first = models.values().next().value!;
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${first.width} ${first.height}`);
  svg.setAttribute("role", "img");

  for (const tick of first.yTicks) {
    const line = document.createElementNS(svg.namespaceURI, "line");
    line.setAttribute("x1", "46");
    line.setAttribute("x2", String(first.width - 12));
    line.setAttribute("y1", String(tick.y));
    line.setAttribute("y2", String(tick.y));
    line.setAttribute("class", "grid");
    svg.appendChild(line);
    const label = document.createElementNS(svg.namespaceURI, "text");
    label.setAttribute("x", "4");
    label.setAttribute("y", String(tick.y + 4));
    label.setAttribute("class", "tick");
    label.textContent = tick.label;
    svg.appendChild(label);
  }
  for (const tick of first.xTicks) {
    const label = document.createElementNS(svg.namespaceURI, "text");
    label.setAttribute("x", String(tick.x));
    label.setAttribute("y", String(first.height - 8));
    label.setAttribute("class", "tick middle");
    label.textContent = tick.label;
    svg.appendChild(label);
  }

  let index = 0;
  for (const scenario of store.scenarios) {
    const model = models.get(scenario.id);
    if (!model) continue;
    const color = COLORS[index % COLORS.length]!;
    const band = document.createElementNS(svg.namespaceURI, "path");
    band.setAttribute("d", model.bandPath);
    band.setAttribute("fill", color);
    band.setAttribute("opacity", "0.14");
    svg.appendChild(band);
    const line = document.createElementNS(svg.namespaceURI, "path");
    line.setAttribute("d", model.linePath);
    line.setAttribute("fill", "none");
    line.setAttribute("stroke", color);
    line.setAttribute("stroke-width", "2");
    svg.appendChild(line);
    for (const p of model.points) {
      const dot = document.createElementNS(svg.namespaceURI, "circle");
      dot.setAttribute("cx", String(p.x));
      dot.setAttribute("cy", String(p.y));
      dot.setAttribute("r", "2.6");
      dot.setAttribute("fill", color);
      const tip = document.createElementNS(svg.namespaceURI, "title");
      tip.textContent = `${scenario.label} — age ${p.age}: ${formatPercent(p.risk)} ` +
        `(${formatPercent(p.criLow)}–${formatPercent(p.criHigh)})`;
      dot.appendChild(tip);
      svg.appendChild(dot);
    }
    index += 1;
  }
  host.appendChild(svg);
}

async function runComparison(): Promise<void> {
  if (!meta) return;
  const ready = store.scenarios.filter((s) => canSubmit(s, meta));
  if (ready.length === 0) return;
  try {
    const result = await compareScenarios(api, store, ready.map((s) => s.id));
    const host = document.getElementById("table")!;
    host.innerHTML = "";
    const table = el("table");
    const head = el("tr");
    for (const column of ["scenario", "5-year risk", "15-year risk",
                          "risk over window", "95% CrI"]) {
      head.appendChild(el("th", {}, column));
    }
    table.appendChild(head);
    for (const row of tableCells(result.rows)) {
      const tr = el("tr");
      tr.appendChild(el("td", {}, row.label));
      tr.appendChild(el("td", {}, row.fiveYear));
      tr.appendChild(el("td", {}, row.fifteenYear));
      tr.appendChild(el("td", {}, row.horizon));
      tr.appendChild(el("td", {}, row.interval));
      table.appendChild(tr);
    }
    host.appendChild(table);
    refresh();
  } catch (error) {
    banner(describeError(error), () => void runComparison());
  }
}

function refresh(): void {
  const host = document.getElementById("scenarios")!;
  host.innerHTML = "";
  store.scenarios.forEach((scenario, index) => {
    host.appendChild(scenarioCard(scenario, index));
  });
  const compareBtn = document.getElementById("compare") as HTMLButtonElement;
  compareBtn.disabled = !meta
    || store.scenarios.length === 0
    || !store.scenarios.every((s) => canSubmit(s, meta));
  drawChart();
}

async function boot(): Promise<void> {
  try {
    meta = await api.meta();
  } catch (error) {
    banner(describeError(error), () => void boot());
    return;
  }
  document.getElementById("model-note")!.textContent =
    `model v${meta.version} · ${meta.diagnostics.n_draws} posterior draws · ` +
    `ages ${meta.domain.low}–${meta.domain.high} · ${meta.preprocessing}`;
  if (store.scenarios.length === 0) {
    store.add(defaultProfile(meta), "at_first_use", 16, 31, "baseline");
  }
  document.getElementById("add")!.addEventListener("click", () => {
    store.add(defaultProfile(meta!), "at_first_use", 16, 31);
    refresh();
  });
  document.getElementById("compare")!.addEventListener("click",
    () => void runComparison());
  refresh();
}

void boot();
