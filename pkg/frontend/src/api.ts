/** Typed client for the serve-mode HTTP API. */

export interface ScenarioRequest {
  wind_speed: number;
  wind_direction: number;
  pattern: string;
  seed?: number;
}

export interface ScenarioEcho {
  wind_speed: number;
  wind_direction: number;
  pattern: string;
  seed: number;
  rows: number;
  cols: number;
  steps: number;
}

export interface ScenarioResult {
  frames: number[][][];
  ba_percent: number[];
  ros: number[];
  inference_ms: number;
  scenario: ScenarioEcho;
}

export interface PatternsInfo {
  patterns: string[];
  rows: number;
  cols: number;
  steps: number;
}

export interface RunListing {
  runs: {
    run_id: string;
    pattern: string;
    wind_speed: number;
    wind_direction: number;
    role: string;
  }[];
  train: string[];
  test: string[];
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: unknown,
  ) {
    super(`HTTP ${status}`);
  }

  /** True for the serve mode's unknown-pattern contract. */
  get unknownPattern(): boolean {
    return (
      this.status === 404 &&
      typeof this.body === "object" &&
      this.body !== null &&
      (this.body as { error?: string }).error === "unknown_pattern"
    );
  }
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export class Client {
  constructor(
    private readonly base: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(this.base + path);
    const body = await resp.json();
    if (resp.status !== 200) throw new ApiError(resp.status, body);
    return body as T;
  }

  private async post<T>(path: string, payload: unknown): Promise<T> {
    const resp = await this.fetchFn(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    const body = await resp.json();
    if (resp.status !== 200) throw new ApiError(resp.status, body);
    return body as T;
  }

  getPatterns(): Promise<PatternsInfo> {
    return this.get("/patterns");
  }

  getRuns(): Promise<RunListing> {
    return this.get("/runs");
  }

  predict(req: ScenarioRequest): Promise<ScenarioResult> {
    return this.post("/predict", req);
  }

  simulate(req: ScenarioRequest): Promise<ScenarioResult> {
    return this.post("/simulate", req);
  }
}

/**
 * Drops stale responses: each start() supersedes earlier ones, and accept()
 * only passes for the most recent token.
 */
export class LatestGate {
  private counter = 0;

  start(): number {
    this.counter += 1;
    return this.counter;
  }

  accept(token: number): boolean {
    return token === this.counter;
  }
}
