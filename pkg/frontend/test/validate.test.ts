import { describe, expect, it } from "vitest";

import type { ModelMeta, Scenario } from "../src/types.js";
import { canSubmit, scenarioErrors, validateAges, validateProfile } from "../src/validate.js";
import goldens from "./fixtures/service_goldens.json";

const meta = goldens.meta as unknown as ModelMeta;

function validProfile(): Record<string, number> {
  const profile: Record<string, number> = {};
  for (const cov of meta.covariates) {
    profile[cov.name] = cov.kind === "binary" ? 1 : (cov.min + cov.max) / 2;
  }
  return profile;
}

function scenario(overrides: Partial<Scenario> = {}): Scenario {
  return {
    id: 1, label: "s", profile: validProfile(), anchor: "at_first_use",
    a: 16, b: 21, estimate: null, ...overrides,
  };
}

describe("profile validation against model meta", () => {
  it("accepts a complete in-range profile", () => {
    expect(validateProfile(validProfile(), meta)).toEqual([]);
  });

  it("rejects a missing covariate", () => {
    const profile = validProfile();
    delete profile.neuroticism;
    const errors = validateProfile(profile, meta);
    expect(errors).toHaveLength(1);
    expect(errors[0]).toMatchObject({ field: "neuroticism" });
  });

  it("rejects out-of-range scale values", () => {
    const cov = meta.covariates.find((c) => c.kind === "scale")!;
    const profile = validProfile();
    profile[cov.name] = cov.max + 0.5;
    expect(validateProfile(profile, meta)[0]).toMatchObject({ field: cov.name });
  });

  it("rejects non-binary values for binary factors", () => {
    const cov = meta.covariates.find((c) => c.kind === "binary")!;
    const profile = validProfile();
    profile[cov.name] = 0.5;
    expect(validateProfile(profile, meta)[0]).toMatchObject({
      field: cov.name, message: "must be 0 or 1",
    });
  });

  it("rejects NaN and unknown fields", () => {
    const profile = validProfile();
    profile.sex = Number.NaN;
    profile.zodiac = 1;
    const fields = validateProfile(profile, meta).map((e) => e.field);
    expect(fields).toContain("sex");
    expect(fields).toContain("zodiac");
  });
});

describe("age window validation", () => {
  it("accepts windows inside the model domain", () => {
    expect(validateAges(16, 31, meta)).toEqual([]);
  });

  it("rejects a reversed window", () => {
    expect(validateAges(21, 16, meta).length).toBeGreaterThan(0);
  });

  it("rejects ages outside the domain", () => {
    expect(validateAges(5, 10, meta).length).toBeGreaterThan(0);
    expect(validateAges(16, meta.domain.high + 5, meta).length).toBeGreaterThan(0);
  });
});

describe("submit gating", () => {
  it("permits submission only when every check passes", () => {
    expect(canSubmit(scenario(), meta)).toBe(true);
  });

  it("is blocked until meta is loaded", () => {
    expect(canSubmit(scenario(), null)).toBe(false);
  });

  it("is blocked by any invalid field", () => {
    const bad = scenario();
    bad.profile.delinquency = 7.5;
    expect(canSubmit(bad, meta)).toBe(false);
    expect(scenarioErrors(bad, meta)).toHaveLength(1);
  });

  it("is blocked by an invalid window even with a valid profile", () => {
    expect(canSubmit(scenario({ b: 10 }), meta)).toBe(false);
  });
});
