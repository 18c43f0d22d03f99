/** Delta histogram binning: fixed 5 pp bins over [-100, 100] so
 * histograms stay comparable across experiments. */

export const HIST_MIN = -100;
export const HIST_MAX = 100;
export const BIN_WIDTH = 5;
export const BIN_COUNT = (HIST_MAX - HIST_MIN) / BIN_WIDTH; // 40

export function binIndex(deltaPp: number): number {
  const idx = Math.floor((deltaPp - HIST_MIN) / BIN_WIDTH);
  return Math.min(Math.max(idx, 0), BIN_COUNT - 1);
}

export function histogram(deltasPp: number[]): number[] {
  const bins = new Array<number>(BIN_COUNT).fill(0);
  for (const d of deltasPp) bins[binIndex(d)] += 1;
  return bins;
}

export function binLabel(index: number): string {
  const lo = HIST_MIN + index * BIN_WIDTH;
  return `${lo}..${lo + BIN_WIDTH}`;
}
