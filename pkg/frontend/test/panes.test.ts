import { describe, expect, it } from "vitest";

import { CellsResponse, RollupResponse } from "../src/api.js";
import { cellTableHtml, clusteringModel, clusterTableHtml, explorationModel,
         keyText, pieEntries, regressionModel, regressionTableHtml,
         rollupModel, rollupTableHtml } from "../src/panes.js";

const CELLS: CellsResponse = {
  snapshot: 3,
  engine_version: "0.1.0",
  name: "FerryInformationCube",
  cuboid: "Ferry=operator,GeographicalArea=city",
  cells: [
    { key: { Ferry: "MedStar", GeographicalArea: "Nice" }, count: 8, sse: 12.5, r2: 0.91 },
    { key: { Ferry: "MedStar", GeographicalArea: "Rome" }, count: 5, sse: 4.0 },
    { key: { Ferry: "Sirena", GeographicalArea: "Nice" }, count: 2 },
  ],
  unplaced_count: 1,
  total_objects: 16,
};

describe("explorationModel", () => {
  it("rows mirror the API counts exactly", () => {
    const model = explorationModel(CELLS);
    expect(model.rows.map((r) => r.count)).toEqual([8, 5, 2]);
    expect(model.placedCount).toBe(15);
    expect(model.unplacedCount).toBe(1);
    expect(model.dims).toEqual(["Ferry", "GeographicalArea"]);
  });

  it("table html shows a row per cell", () => {
    const html = cellTableHtml(explorationModel(CELLS));
    expect(html.match(/<tr>/g)!.length).toBe(4); // header + 3 cells
    expect(html).toContain("MedStar");
  });

  it("empty response renders the empty state", () => {
    const html = cellTableHtml(explorationModel({ ...CELLS, cells: [] }));
    expect(html).toContain("No cells");
  });
});

describe("pieEntries", () => {
  it("groups engine counts by member, largest first", () => {
    expect(pieEntries(CELLS.cells, "GeographicalArea")).toEqual([
      { label: "Nice", value: 10 },
      { label: "Rome", value: 5 },
    ]);
  });
});

describe("clusteringModel", () => {
  it("colors match k and sizes pass through", () => {
    const rows = clusteringModel([
      { key: { A: "x" }, count: 9, k: 3, sizes: [4, 3, 2], sse: 1.5, silhouette: 0.4 },
      { key: { A: "y" }, count: 2 },
    ]);
    expect(rows[0]!.colors).toHaveLength(3);
    expect(rows[0]!.sizes).toEqual([4, 3, 2]);
    expect(rows[1]!.k).toBeNull();
    const html = clusterTableHtml(rows);
    expect(html.match(/class="chip"/g)!.length).toBe(3);
  });

  it("k=1 rows disable the silhouette", () => {
    const html = clusterTableHtml(clusteringModel([
      { key: { A: "x" }, count: 4, k: 1, sizes: [4], sse: 0.2 },
    ]));
    expect(html).toContain("n/a (k&lt;2)".replace("&lt;", "<"));
  });
});

describe("regressionModel", () => {
  it("carries betas and the pooled fit", () => {
    const model = regressionModel(
      [
        { key: { A: "x" }, count: 10,
          regression: { beta: [1.0, 2.0], r2: 0.8, rmse: 0.3, lambda: 0, n: 10 } },
        { key: { A: "y" }, count: 2, insufficient_rows: true },
      ],
      { beta: [1.1, 1.9], r2: 0.85, rmse: 0.25, lambda: 0, n: 12,
        predictor_names: ["intercept", "price"] });
    expect(model.rows[0]!.beta).toEqual([1.0, 2.0]);
    expect(model.rows[1]!.insufficient).toBe(true);
    expect(model.predictorNames).toEqual(["intercept", "price"]);
    const html = regressionTableHtml(model);
    expect(html).toContain("pooled fit");
    expect(html).toContain("too few rows");
  });
});

const ROLLUP: RollupResponse = {
  snapshot: 4,
  name: "FerryInformationCube",
  dim: "GeographicalArea",
  mode: "merge_stats",
  parent_cuboid: "Ferry=operator,GeographicalArea=region",
  unplaced_count: 0,
  cells: [
    {
      key: { Ferry: "MedStar", GeographicalArea: "South" },
      count: 13,
      children: [
        { key: { Ferry: "MedStar", GeographicalArea: "Nice" }, count: 8 },
        { key: { Ferry: "MedStar", GeographicalArea: "Rome" }, count: 5 },
      ],
      regression: { beta: [0.5], r2: 0.7, rmse: 0.4, lambda: 0, n: 13 },
    },
  ],
};

describe("rollupModel", () => {
  it("parent n equals the sum of its children", () => {
    const rows = rollupModel(ROLLUP);
    expect(rows[0]!.childSum).toBe(13);
    expect(rows[0]!.consistent).toBe(true);
    expect(rows[0]!.children.map((c) => c.count)).toEqual([8, 5]);
  });

  it("inconsistent counts are flagged", () => {
    const broken: RollupResponse = {
      ...ROLLUP,
      cells: [{ ...ROLLUP.cells[0]!, count: 99 }],
    };
    expect(rollupModel(broken)[0]!.consistent).toBe(false);
    expect(rollupTableHtml(rollupModel(broken))).toContain("✗");
  });
});

describe("keyText", () => {
  it("renders members in order and the apex specially", () => {
    expect(keyText({ A: "x", B: 2 })).toBe("A=x, B=2");
    expect(keyText({})).toBe("(apex)");
  });
});
