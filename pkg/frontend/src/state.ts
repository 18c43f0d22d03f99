/** Session view state: the active run, cluster selection, overlay mode,
 * the bias-spec draft being edited, and an append-only experiment
 * history so each hypothesis is informed by the last result. */

import type { BiasSpecPayload, ExperimentReport, RunResult } from "./api.js";

export interface ExperimentRecord {
  spec: BiasSpecPayload;
  report: ExperimentReport;
  jobId: string;
}

export class ViewState {
  activeRun: RunResult | null = null;
  selectedCluster: number | null = null;
  overlayMode: "image" | "attribution" | "blend" = "image";
  page = 0;
  pendingHypothesis: BiasSpecPayload = { kind: "black_frame", seed: 0 };
  private readonly experiments: ExperimentRecord[] = [];

  setRun(run: RunResult): void {
    this.activeRun = run;
    this.selectedCluster = null;
    this.page = 0;
  }

  selectCluster(index: number | null): void {
    if (index === null) {
      this.selectedCluster = null;
      return;
    }
    if (!this.activeRun || index < 0 || index >= this.activeRun.n_clusters) {
      throw new RangeError(`cluster ${index} out of range`);
    }
    this.selectedCluster = index;
    this.page = 0;
  }

  recordExperiment(record: ExperimentRecord): void {
    this.experiments.push(record);
  }

  get history(): readonly ExperimentRecord[] {
    return this.experiments;
  }
}

/** Deep link: run id + cluster index fully determine the grid view. */
export function encodeHash(runId: string, cluster: number | null): string {
  const parts = [`run=${encodeURIComponent(runId)}`];
  if (cluster !== null) parts.push(`cluster=${cluster}`);
  return "#" + parts.join("&");
}

export function parseHash(hash: string): { runId: string; cluster: number | null } | null {
  const params = new URLSearchParams(hash.replace(/^#/, ""));
  const runId = params.get("run");
  if (!runId) return null;
  const clusterRaw = params.get("cluster");
  const cluster = clusterRaw === null ? null : Number(clusterRaw);
  if (cluster !== null && (!Number.isInteger(cluster) || cluster < 0)) return null;
  return { runId, cluster };
}
