/** Cluster member grid paging and overlay-layer selection. */

import type { ApiClient } from "./api.js";

export const PAGE_SIZE = 15;

export type OverlayMode = "image" | "attribution" | "blend";

export interface ThumbLayer {
  url: string;
  alpha: number;
}

export function pageCount(nMembers: number): number {
  return Math.ceil(nMembers / PAGE_SIZE);
}

export function pageSlice<T>(members: T[], page: number): T[] {
  const pages = pageCount(members.length);
  if (pages === 0) return [];
  const clamped = Math.min(Math.max(page, 0), pages - 1);
  return members.slice(clamped * PAGE_SIZE, (clamped + 1) * PAGE_SIZE);
}

/** Image layers for one thumbnail; blend alpha-composites the heatmap at
 * 50% over the image. */
export function overlayLayers(
  api: ApiClient,
  datasetId: string,
  sampleId: string,
  mode: OverlayMode,
): ThumbLayer[] {
  switch (mode) {
    case "image":
      return [{ url: api.imageUrl(datasetId, sampleId), alpha: 1.0 }];
    case "attribution":
      return [{ url: api.attributionUrl(datasetId, sampleId), alpha: 1.0 }];
    case "blend":
      return [
        { url: api.imageUrl(datasetId, sampleId), alpha: 1.0 },
        { url: api.attributionUrl(datasetId, sampleId), alpha: 0.5 },
      ];
  }
}
