/** Client-side validation against /v1/model/meta.
 *
 * A profile that fails any check is unsendable: the submit action stays
 * disabled until every field validates, so the service never sees a
 * malformed scenario from this UI. */

import type { ModelMeta, Profile, Scenario } from "./types.js";

export interface FieldError {
  field: string;
  message: string;
}

export function validateProfile(profile: Profile, meta: ModelMeta): FieldError[] {
  const errors: FieldError[] = [];
  for (const cov of meta.covariates) {
    const value = profile[cov.name];
    if (value === undefined) {
      errors.push({ field: cov.name, message: "missing value" });
      continue;
    }
    if (typeof value !== "number" || !Number.isFinite(value)) {
      errors.push({ field: cov.name, message: "must be a finite number" });
      continue;
    }
    if (cov.kind === "binary") {
      if (value !== 0 && value !== 1) {
        errors.push({ field: cov.name, message: "must be 0 or 1" });
      }
      continue;
    }
    if (value < cov.min || value > cov.max) {
      errors.push({
        field: cov.name,
        message: `must lie within [${cov.min}, ${cov.max}]`,
      });
    }
  }
  const known = new Set(meta.covariates.map((c) => c.name));
  for (const name of Object.keys(profile)) {
    if (!known.has(name)) {
      errors.push({ field: name, message: "unknown covariate" });
    }
  }
  return errors;
}

export function validateAges(a: number, b: number, meta: ModelMeta): FieldError[] {
  const errors: FieldError[] = [];
  if (!Number.isFinite(a)) errors.push({ field: "a", message: "must be a number" });
  if (!Number.isFinite(b)) errors.push({ field: "b", message: "must be a number" });
  if (errors.length) return errors;
  if (b < a) errors.push({ field: "b", message: "horizon must not precede the start age" });
  if (a < meta.domain.low || b > meta.domain.high) {
    errors.push({
      field: "a",
      message: `ages must lie within the model domain [${meta.domain.low}, ${meta.domain.high}]`,
    });
  }
  if (b > meta.life_table.max_age + 1) {
    errors.push({ field: "b", message: "beyond life-table coverage" });
  }
  return errors;
}

export function scenarioErrors(scenario: Scenario, meta: ModelMeta): FieldError[] {
  return [
    ...validateProfile(scenario.profile, meta),
    ...validateAges(scenario.a, scenario.b, meta),
  ];
}

export function canSubmit(scenario: Scenario, meta: ModelMeta | null): boolean {
  if (meta === null) return false;
  return scenarioErrors(scenario, meta).length === 0;
}
