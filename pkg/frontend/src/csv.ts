/** Parsers for the API's two delimited formats. */

export interface VizRow {
  id: string;
  x: number;
  y: number;
  z: number;
  cluster: number;
}

export interface DeltaRow {
  id: string;
  label: string;
  p_before: number;
  p_after: number;
  delta_pp: number;
  flip: "to_malignant" | "to_benign" | "none";
}

function dataLines(text: string): string[] {
  return text.split("\n").map((l) => l.trim()).filter((l) => l.length > 0).slice(1);
}

export function parseVizCsv(text: string): VizRow[] {
  return dataLines(text).map((line) => {
    const [id, x, y, z, cluster] = line.split(",");
    return { id, x: Number(x), y: Number(y), z: Number(z), cluster: Number(cluster) };
  });
}

export function parseDeltasCsv(text: string): DeltaRow[] {
  return dataLines(text).map((line) => {
    const [id, label, before, after, pp, flip] = line.split(",");
    return {
      id,
      label,
      p_before: Number(before),
      p_after: Number(after),
      delta_pp: Number(pp),
      flip: flip as DeltaRow["flip"],
    };
  });
}
