import { describe, expect, it } from "vitest";

import { panelRows, sparklinePoints } from "../src/render.js";
import type { LatencyFrame } from "../src/protocol.js";

describe("sparklinePoints", () => {
  it("returns nothing for an empty series", () => {
    expect(sparklinePoints([], 100, 50)).toEqual([]);
  });

  it("spaces points evenly across the width", () => {
    const pts = sparklinePoints([1, 2, 3, 4, 5], 104, 50, 2);
    expect(pts.length).toBe(5);
    expect(pts[0]?.[0]).toBe(2);
    expect(pts[4]?.[0]).toBe(102);
    const gap = (pts[1]?.[0] ?? 0) - (pts[0]?.[0] ?? 0);
    expect(gap).toBe(25);
  });

  it("maps larger values higher up the canvas", () => {
    const pts = sparklinePoints([10, 40], 100, 100);
    expect(pts[1]?.[1]).toBeLessThan(pts[0]?.[1] ?? 0);
  });

  it("keeps points inside the padded box", () => {
    const pts = sparklinePoints([0, 5, 500], 100, 60, 4);
    for (const [x, y] of pts) {
      expect(x).toBeGreaterThanOrEqual(4);
      expect(x).toBeLessThanOrEqual(96);
      expect(y).toBeGreaterThanOrEqual(4);
      expect(y).toBeLessThanOrEqual(56);
    }
  });
});

describe("panelRows", () => {
  const frame: LatencyFrame = {
    v: 1,
    type: "latency",
    stats: {
      n: 1000,
      mean_ms: 19.983355102,
      median_ms: 18.99,
      std_ms: 4.4,
      min_ms: 12,
      max_ms: 35,
      p95_ms: 27,
    },
    one_way_ms: 9.991677551,
    within_threshold: true,
    dropped: 2,
    series: [19, 21],
  };

  it("is empty before any bench", () => {
    expect(panelRows(null)).toEqual([]);
  });

  it("passes frame values through untouched", () => {
    const rows = panelRows(frame);
    const byLabel = new Map(rows.map((r) => [r.label, r.raw]));
    // Exact equality: the panel must not recompute or round its source.
    expect(byLabel.get("frames")).toBe(1000);
    expect(byLabel.get("mean")).toBe(19.983355102);
    expect(byLabel.get("median")).toBe(18.99);
    expect(byLabel.get("std")).toBe(4.4);
    expect(byLabel.get("p95")).toBe(27);
    expect(byLabel.get("one way")).toBe(9.991677551);
    expect(byLabel.get("dropped")).toBe(2);
  });

  it("formats display text from the exact values", () => {
    const rows = panelRows(frame);
    const byLabel = new Map(rows.map((r) => [r.label, r.text]));
    expect(byLabel.get("mean")).toBe("19.98 ms");
    expect(byLabel.get("one way")).toBe("9.99 ms");
    expect(byLabel.get("frames")).toBe("1000");
  });
});
