/** 3-D scatter geometry: orthographic yaw/pitch projection fitted to a
 * canvas, cluster palette, legend model and pointer hit-testing. The DOM
 * layer only draws what these pure functions return. */

export interface ProjectedPoint {
  index: number;
  x: number;
  y: number;
  depth: number;
}

export interface LegendEntry {
  cluster: number;
  count: number;
  color: string;
}

// ten-class palette, repeats beyond ten
const PALETTE = [
  "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
  "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
];

export function clusterColor(cluster: number): string {
  return PALETTE[((cluster % PALETTE.length) + PALETTE.length) % PALETTE.length];
}

/** One legend entry per cluster index; empty clusters appear with count 0. */
export function buildLegend(nClusters: number, labels: number[]): LegendEntry[] {
  const counts = new Array<number>(nClusters).fill(0);
  for (const l of labels) {
    if (l >= 0 && l < nClusters) counts[l] += 1;
  }
  return counts.map((count, cluster) => ({ cluster, count, color: clusterColor(cluster) }));
}

/** Rotate by yaw (around y) then pitch (around x), drop z, and fit the
 * result into a width x height viewport with the given margin. */
export function project(
  points: [number, number, number][],
  yaw: number,
  pitch: number,
  width: number,
  height: number,
  margin = 24,
): ProjectedPoint[] {
  if (points.length === 0) return [];
  const cy = Math.cos(yaw), sy = Math.sin(yaw);
  const cp = Math.cos(pitch), sp = Math.sin(pitch);
  const rotated = points.map(([x, y, z], index) => {
    const rx = cy * x + sy * z;
    const rz = -sy * x + cy * z;
    const ry = cp * y - sp * rz;
    const depth = sp * y + cp * rz;
    return { index, x: rx, y: ry, depth };
  });
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (const p of rotated) {
    minX = Math.min(minX, p.x);
    maxX = Math.max(maxX, p.x);
    minY = Math.min(minY, p.y);
    maxY = Math.max(maxY, p.y);
  }
  const spanX = maxX - minX || 1;
  const spanY = maxY - minY || 1;
  const scale = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
  const offX = (width - scale * spanX) / 2;
  const offY = (height - scale * spanY) / 2;
  return rotated.map((p) => ({
    index: p.index,
    x: offX + (p.x - minX) * scale,
    y: height - (offY + (p.y - minY) * scale), // canvas y grows downward
    depth: p.depth,
  }));
}

/** Index of the closest projected point within maxDist, or null. */
export function nearestPoint(
  projected: ProjectedPoint[],
  x: number,
  y: number,
  maxDist = 12,
): number | null {
  let best: number | null = null;
  let bestDist = maxDist;
  for (const p of projected) {
    const d = Math.hypot(p.x - x, p.y - y);
    if (d <= bestDist) {
      bestDist = d;
      best = p.index;
    }
  }
  return best;
}
