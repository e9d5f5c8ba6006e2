/** Wire types mirroring the prediction service responses verbatim. */

export type Anchor = "at_first_use" | "at_age";

export interface CurvePoint {
  age: number;
  risk: number;
  cri_low: number;
  cri_high: number;
}

export interface RiskEstimate {
  mean_risk: number;
  cri_low: number;
  cri_high: number;
  per_year_curve: CurvePoint[];
}

export interface CovariateMeta {
  name: string;
  min: number;
  max: number;
  kind: "binary" | "scale";
}

export interface ModelMeta {
  version: number;
  covariates: CovariateMeta[];
  domain: { low: number; high: number };
  life_table: { name: string; max_age: number };
  anchors: string[];
  preprocessing: string;
  diagnostics: {
    n_draws: number;
    rhat_max: number | null;
    ess_min: number | null;
    divergences: number | null;
  };
}

export type Profile = Record<string, number>;

export interface Scenario {
  id: number;
  label: string;
  profile: Profile;
  anchor: Anchor;
  a: number;
  b: number;
  estimate: RiskEstimate | null;
}

export interface WhatifEntry {
  label: string;
  profile: Profile;
  estimate: RiskEstimate;
}

export interface WhatifResponse {
  estimates: WhatifEntry[];
}
