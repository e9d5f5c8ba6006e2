/** Typed client for the /v1 prediction API; the fetch function is injectable
 * so tests can run against golden fixtures without a network. */

import type {
  Anchor, ModelMeta, Profile, RiskEstimate, WhatifResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly payload: unknown,
    message?: string,
  ) {
    super(message ?? `service responded with ${status}`);
  }
}

async function readJson(response: Response): Promise<unknown> {
  try {
    return await response.json();
  } catch {
    return null;
  }
}

export class PredictionApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path);
    const payload = await readJson(response);
    if (!response.ok) throw new ApiError(response.status, payload);
    return payload as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = await readJson(response);
    if (!response.ok) throw new ApiError(response.status, payload);
    return payload as T;
  }

  meta(): Promise<ModelMeta> {
    return this.get<ModelMeta>("/v1/model/meta");
  }

  predict(profile: Profile, a: number, b: number, anchor: Anchor): Promise<RiskEstimate> {
    return this.post<RiskEstimate>("/v1/predict", { profile, a, b, anchor });
  }

  whatif(
    profile: Profile,
    deltas: Profile[],
    a: number,
    b: number,
    anchor: Anchor,
  ): Promise<WhatifResponse> {
    return this.post<WhatifResponse>("/v1/whatif", { profile, deltas, a, b, anchor });
  }
}
