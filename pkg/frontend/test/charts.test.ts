import { describe, expect, it } from "vitest";

import { clusterPalette, decodeCentroid, histogramBins, histogramSvg, pieSlices,
         pieSvg, scatterPoints, scatterSvg } from "../src/charts.js";

describe("clusterPalette", () => {
  it("returns exactly k distinct colors", () => {
    for (const k of [1, 2, 3, 7, 12]) {
      const palette = clusterPalette(k);
      expect(palette).toHaveLength(k);
      expect(new Set(palette).size).toBe(k);
    }
  });

  it("is stable for a given k", () => {
    expect(clusterPalette(5)).toEqual(clusterPalette(5));
  });
});

describe("histogramBins", () => {
  it("covers every value exactly once", () => {
    const values = [1, 2, 2, 3, 8, 9, 9, 9, 10];
    const bins = histogramBins(values, 4);
    expect(bins.reduce((acc, b) => acc + b.count, 0)).toBe(values.length);
    expect(bins[0]!.x0).toBe(1);
    expect(bins[bins.length - 1]!.x1).toBe(10);
  });

  it("handles constant data", () => {
    const bins = histogramBins([5, 5, 5], 3);
    expect(bins.reduce((acc, b) => acc + b.count, 0)).toBe(3);
  });

  it("empty input gives no bins and a placeholder svg", () => {
    expect(histogramBins([])).toEqual([]);
    expect(histogramSvg([])).toContain("no cells");
  });
});

describe("pieSlices", () => {
  it("angles partition the full circle by value share", () => {
    const slices = pieSlices([
      { label: "a", value: 3 },
      { label: "b", value: 1 },
    ]);
    expect(slices).toHaveLength(2);
    expect(slices[0]!.fraction).toBeCloseTo(0.75, 12);
    expect(slices[0]!.startAngle).toBe(0);
    expect(slices[1]!.endAngle).toBeCloseTo(2 * Math.PI, 12);
  });

  it("zero total yields nothing", () => {
    expect(pieSlices([{ label: "a", value: 0 }])).toEqual([]);
  });

  it("svg embeds one shape per slice with labels", () => {
    const svg = pieSvg([
      { label: "south", value: 10 },
      { label: "north", value: 5 },
    ]);
    expect(svg.match(/<path/g)).toHaveLength(2);
    expect(svg).toContain("south");
  });
});

const CLUSTERING = {
  centroids: [
    [1.0, -1.0],
    [-0.5, 0.5],
    [0.0, 0.0],
  ],
  feature_columns: ["price", "duration_days"],
  encoding_report: {
    price: { kind: "zscore", mean: 100, std: 20 },
    duration_days: { kind: "zscore", mean: 10, std: 4 },
  },
  assignment: [0, 0, 1, 2, 2, 2],
};

describe("scatterPoints", () => {
  it("renders exactly k colors for a k-cluster cell", () => {
    const points = scatterPoints(CLUSTERING, "price", "duration_days");
    expect(points).toHaveLength(3);
    expect(new Set(points.map((p) => p.color)).size).toBe(3);
  });

  it("decodes z-scored centroids to source units", () => {
    const points = scatterPoints(CLUSTERING, "price", "duration_days");
    expect(points[0]!.x).toBeCloseTo(120, 12); // 1.0 * 20 + 100
    expect(points[0]!.y).toBeCloseTo(6, 12);   // -1.0 * 4 + 10
  });

  it("one-hot columns pass through as shares", () => {
    expect(decodeCentroid("color=red", 0.25, { color: { kind: "onehot" } })).toBe(0.25);
  });

  it("unknown columns give no points", () => {
    expect(scatterPoints(CLUSTERING, "ghost", "price")).toEqual([]);
  });

  it("svg contains one circle per cluster", () => {
    const points = scatterPoints(CLUSTERING, "price", "duration_days");
    const svg = scatterSvg(points, "price", "duration_days");
    expect(svg.match(/<circle/g)).toHaveLength(3);
  });
});
