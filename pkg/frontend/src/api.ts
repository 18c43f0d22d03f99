/** Typed client for the gebi HTTP API. Every number the UI shows comes
 * straight from these responses; nothing is recomputed client-side. */

export interface Job {
  id: string;
  kind: string;
  state: "queued" | "running" | "done" | "failed";
  error: string | null;
  error_stage: string | null;
  result_ref: string | null;
}

export interface RunResult {
  run_id: string;
  config: Record<string, unknown>;
  n_clusters: number;
  labels: number[];
  inertia: number;
  members: string[][];
  ids: string[];
  viz3d: [number, number, number][];
}

export interface ClassStats {
  n: number;
  mean_signed_pp: number;
  mean_abs_pp: number;
  max_abs_pp: number;
  flips_to_malignant: number;
  flips_to_benign: number;
}

export interface BiasSpecPayload {
  kind: "black_frame" | "ruler" | "red_circle" | "none";
  seed: number;
  frame_thickness_frac?: number;
  frame_shape?: "rect" | "round";
}

export interface ExperimentReport {
  per_class: { malignant: ClassStats; benign: ClassStats };
  threshold: number;
  bias_spec: BiasSpecPayload & Record<string, unknown>;
}

export interface ExperimentRequest {
  manifest: string;
  bias: BiasSpecPayload;
  predictor: { kind: string; endpoint?: string };
  threshold?: number;
}

export interface DatasetInfo {
  id: string;
  manifest: string;
  entries: { id: string; label: string; has_attribution: boolean }[];
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string, readonly stage: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    readonly base: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return this.base.replace(/\/$/, "") + path;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.url(path), init);
    const body = await resp.json();
    if (!resp.ok) {
      throw new ApiError(resp.status, body.error ?? resp.statusText, body.stage ?? "unknown");
    }
    return body as T;
  }

  private async requestText(path: string): Promise<string> {
    const resp = await this.fetchFn(this.url(path));
    if (!resp.ok) {
      const body = await resp.json();
      throw new ApiError(resp.status, body.error ?? resp.statusText, body.stage ?? "unknown");
    }
    return resp.text();
  }

  health(): Promise<{ status: string }> {
    return this.request("/health");
  }

  registerDataset(manifest: string): Promise<{ id: string; n_entries: number }> {
    return this.request("/datasets", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ manifest }),
    });
  }

  getDataset(id: string): Promise<DatasetInfo> {
    return this.request(`/datasets/${id}`);
  }

  submitRun(config: Record<string, unknown>): Promise<Job> {
    return this.request("/runs", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(config),
    });
  }

  getJob(id: string): Promise<Job> {
    return this.request(`/jobs/${id}`);
  }

  getRun(ref: string): Promise<RunResult> {
    return this.request(`/runs/${ref}`);
  }

  submitExperiment(req: ExperimentRequest): Promise<Job> {
    return this.request("/experiments", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
  }

  getReport(ref: string): Promise<ExperimentReport> {
    return this.request(`/experiments/${ref}/report`);
  }

  getDeltasCsv(ref: string): Promise<string> {
    return this.requestText(`/experiments/${ref}/deltas`);
  }

  imageUrl(datasetId: string, sampleId: string): string {
    return this.url(`/images/${datasetId}/${sampleId}`);
  }

  attributionUrl(datasetId: string, sampleId: string): string {
    return this.url(`/attributions/${datasetId}/${sampleId}`);
  }

  /** Poll a job until it settles; rejects on failure or timeout. */
  async pollJob(id: string, intervalMs = 250, timeoutMs = 120_000): Promise<Job> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const job = await this.getJob(id);
      if (job.state === "done") return job;
      if (job.state === "failed") {
        throw new ApiError(500, job.error ?? "job failed", job.error_stage ?? "job");
      }
      if (Date.now() > deadline) throw new ApiError(408, `job ${id} timed out`, "poll");
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
  }
}
