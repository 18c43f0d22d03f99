import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { overlayLayers, PAGE_SIZE, pageCount, pageSlice } from "../src/grid.js";

const members = Array.from({ length: 40 }, (_, i) => `s${i}`);

describe("paging", () => {
  it("pages at 15 per page", () => {
    expect(PAGE_SIZE).toBe(15);
    expect(pageCount(40)).toBe(3);
    expect(pageSlice(members, 0)).toHaveLength(15);
    expect(pageSlice(members, 1)).toHaveLength(15);
    expect(pageSlice(members, 2)).toHaveLength(10);
  });

  it("first page shows min(15, size)", () => {
    expect(pageSlice(members.slice(0, 7), 0)).toHaveLength(7);
    expect(pageSlice(members, 0)[0]).toBe("s0");
  });

  it("empty cluster has no pages", () => {
    expect(pageCount(0)).toBe(0);
    expect(pageSlice([], 0)).toEqual([]);
  });

  it("clamps out-of-range pages", () => {
    expect(pageSlice(members, 99)).toHaveLength(10);
    expect(pageSlice(members, -1)).toHaveLength(15);
  });
});

describe("overlayLayers", () => {
  const api = new ApiClient("http://api.test");

  it("image mode is a single opaque layer", () => {
    const layers = overlayLayers(api, "ds", "s1", "image");
    expect(layers).toEqual([{ url: "http://api.test/images/ds/s1", alpha: 1.0 }]);
  });

  it("attribution mode fetches the heatmap", () => {
    const layers = overlayLayers(api, "ds", "s1", "attribution");
    expect(layers[0].url).toBe("http://api.test/attributions/ds/s1");
  });

  it("blend composites the heatmap at 50%", () => {
    const layers = overlayLayers(api, "ds", "s1", "blend");
    expect(layers).toHaveLength(2);
    expect(layers[0].alpha).toBe(1.0);
    expect(layers[1].alpha).toBe(0.5);
    expect(layers[1].url).toContain("/attributions/");
  });
});
