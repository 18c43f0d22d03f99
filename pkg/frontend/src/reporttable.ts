/** Row model for the experiment report table: a direct projection of the
 * /report JSON, so what the table shows is exactly what the API said. */

import type { DeltaRow } from "./csv.js";
import type { ExperimentReport } from "./api.js";

export interface ReportRow {
  type: "Mal" | "Ben";
  n: number;
  meanAbsPp: string;
  maxAbsPp: string;
  flipsToMalignant: number;
  flipsToBenign: number;
}

export function reportRows(report: ExperimentReport): ReportRow[] {
  return (["malignant", "benign"] as const).map((cls) => {
    const s = report.per_class[cls];
    return {
      type: cls === "malignant" ? "Mal" : "Ben",
      n: s.n,
      meanAbsPp: s.mean_abs_pp.toFixed(2),
      maxAbsPp: s.max_abs_pp.toFixed(2),
      flipsToMalignant: s.flips_to_malignant,
      flipsToBenign: s.flips_to_benign,
    };
  });
}

export function sortByDelta(deltas: DeltaRow[], descending: boolean): DeltaRow[] {
  return [...deltas].sort((a, b) =>
    descending ? b.delta_pp - a.delta_pp : a.delta_pp - b.delta_pp,
  );
}
