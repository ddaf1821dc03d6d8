/* View models for the exploration, clustering and regression panes.
 *
 * Each model is a pure projection of one API response; the render
 * helpers turn models into HTML strings. Numbers pass through untouched
 * (the engine computed them), the only local arithmetic is grouping
 * engine-provided counts for the pie display. */

import { CellBrief, CellsResponse, Member, RegressionFit, RollupResponse } from "./api.js";
import { clusterPalette, esc } from "./charts.js";

export interface CellRow {
  keyText: string;
  key: Record<string, Member>;
  count: number;
  sse: number | null;
  r2: number | null;
  silhouette: number | null;
}

export interface ExplorationModel {
  cuboid: string;
  rows: CellRow[];
  totalObjects: number;
  unplacedCount: number;
  placedCount: number;
  cellSizes: number[];
  dims: string[];
}

export function keyText(key: Record<string, Member>): string {
  return Object.entries(key)
    .map(([d, m]) => `${d}=${m}`)
    .join(", ") || "(apex)";
}

export function explorationModel(response: CellsResponse): ExplorationModel {
  const rows = response.cells.map((c) => ({
    keyText: keyText(c.key),
    key: c.key,
    count: c.count,
    sse: c.sse ?? null,
    r2: c.r2 ?? null,
    silhouette: c.silhouette ?? null,
  }));
  const first = response.cells[0];
  return {
    cuboid: response.cuboid,
    rows,
    totalObjects: response.total_objects,
    unplacedCount: response.unplaced_count,
    placedCount: rows.reduce((acc, r) => acc + r.count, 0),
    cellSizes: rows.map((r) => r.count),
    dims: first ? Object.keys(first.key) : [],
  };
}

/** Engine-provided counts grouped by one dimension's member, for the pie. */
export function pieEntries(cells: CellBrief[], dim: string): { label: string; value: number }[] {
  const totals = new Map<string, number>();
  for (const cell of cells) {
    const member = String(cell.key[dim] ?? "?");
    totals.set(member, (totals.get(member) ?? 0) + cell.count);
  }
  return [...totals.entries()]
    .sort((a, b) => b[1] - a[1])
    .map(([label, value]) => ({ label, value }));
}

export interface ClusterRow {
  keyText: string;
  count: number;
  k: number | null;
  sizes: number[];
  sse: number | null;
  silhouette: number | null;
  colors: string[];
}

export function clusteringModel(cells: CellBrief[]): ClusterRow[] {
  return cells.map((c) => ({
    keyText: keyText(c.key),
    count: c.count,
    k: c.k ?? null,
    sizes: c.sizes ?? [],
    sse: c.sse ?? null,
    silhouette: c.silhouette ?? null,
    colors: c.k ? clusterPalette(c.k) : [],
  }));
}

export interface RegressionRow {
  keyText: string;
  count: number;
  beta: number[] | null;
  r2: number | null;
  rmse: number | null;
  fitN: number | null;
  insufficient: boolean;
}

export interface RegressionModel {
  rows: RegressionRow[];
  predictorNames: string[];
  overall: RegressionFit | null;
}

export function regressionModel(cells: CellBrief[], overall?: RegressionFit): RegressionModel {
  return {
    rows: cells.map((c) => ({
      keyText: keyText(c.key),
      count: c.count,
      beta: c.regression?.beta ?? null,
      r2: c.regression?.r2 ?? null,
      rmse: c.regression?.rmse ?? null,
      fitN: c.regression?.n ?? null,
      insufficient: c.insufficient_rows ?? false,
    })),
    predictorNames: overall?.predictor_names ?? [],
    overall: overall ?? null,
  };
}

export interface RollupRow {
  keyText: string;
  count: number;
  childCounts: number[];
  childSum: number;
  consistent: boolean;
  children: { keyText: string; count: number }[];
  regression: RegressionFit | null;
}

export function rollupModel(response: RollupResponse): RollupRow[] {
  return response.cells.map((c) => {
    const children = (c.children ?? []).map((ch) => ({
      keyText: keyText(ch.key),
      count: ch.count,
    }));
    const childSum = children.reduce((acc, ch) => acc + ch.count, 0);
    return {
      keyText: keyText(c.key),
      count: c.count,
      childCounts: children.map((ch) => ch.count),
      childSum,
      consistent: childSum === c.count,
      children,
      regression: c.regression ?? null,
    };
  });
}

// ---------------------------------------------------------------------------
// HTML renderers

const num = (v: number | null, digits = 3): string =>
  v === null ? "–" : Number(v).toFixed(digits);

export function cellTableHtml(model: ExplorationModel): string {
  if (model.rows.length === 0) {
    return `<p class="empty">No cells match the current slice.</p>`;
  }
  const body = model.rows
    .map((r) =>
      `<tr><td>${esc(r.keyText)}</td><td class="n">${r.count}</td>` +
      `<td class="n">${num(r.sse)}</td><td class="n">${num(r.r2)}</td></tr>`)
    .join("");
  return `<table><thead><tr><th>cell</th><th>n</th><th>SSE</th><th>R²</th></tr></thead>` +
    `<tbody>${body}</tbody></table>`;
}

export function clusterTableHtml(rows: ClusterRow[]): string {
  const body = rows
    .map((r) => {
      const chips = r.sizes
        .map((s, j) => `<span class="chip" style="background:${r.colors[j]}">${s}</span>`)
        .join(" ");
      const sil = r.k !== null && r.k < 2 ? "n/a (k<2)" : num(r.silhouette);
      return `<tr><td>${esc(r.keyText)}</td><td class="n">${r.count}</td>` +
        `<td class="n">${r.k ?? "–"}</td><td>${chips}</td>` +
        `<td class="n">${num(r.sse)}</td><td class="n">${sil}</td></tr>`;
    })
    .join("");
  return `<table><thead><tr><th>cell</th><th>n</th><th>k</th><th>cluster sizes</th>` +
    `<th>SSE</th><th>silhouette</th></tr></thead><tbody>${body}</tbody></table>`;
}

export function regressionTableHtml(model: RegressionModel): string {
  const names = model.predictorNames.map((n) => `<th>${esc(n)}</th>`).join("");
  const rows = model.rows
    .map((r) => {
      const betas = r.beta
        ? r.beta.map((b) => `<td class="n">${b.toFixed(4)}</td>`).join("")
        : `<td class="n" colspan="${Math.max(model.predictorNames.length, 1)}">` +
          `${r.insufficient ? "too few rows" : "–"}</td>`;
      return `<tr><td>${esc(r.keyText)}</td><td class="n">${r.count}</td>${betas}` +
        `<td class="n">${num(r.r2)}</td><td class="n">${num(r.rmse)}</td></tr>`;
    })
    .join("");
  const overall = model.overall
    ? `<p class="overall">pooled fit: n=${model.overall.n}, R²=${model.overall.r2.toFixed(4)}, ` +
      `RMSE=${model.overall.rmse.toFixed(4)}</p>`
    : "";
  return overall + `<table><thead><tr><th>cell</th><th>n</th>${names}` +
    `<th>R²</th><th>RMSE</th></tr></thead><tbody>${rows}</tbody></table>`;
}

export function rollupTableHtml(rows: RollupRow[]): string {
  const body = rows
    .map((r) => {
      const kids = r.children.map((ch) => `${esc(ch.keyText)} (${ch.count})`).join("<br>");
      const mark = r.consistent ? "✓" : "✗";
      const fit = r.regression ? `R²=${r.regression.r2.toFixed(3)}` : "–";
      return `<tr><td>${esc(r.keyText)}</td><td class="n">${r.count}</td>` +
        `<td class="n">${r.childSum} ${mark}</td><td>${kids}</td><td class="n">${fit}</td></tr>`;
    })
    .join("");
  return `<table><thead><tr><th>parent cell</th><th>n</th><th>Σ children</th>` +
    `<th>children</th><th>fit</th></tr></thead><tbody>${body}</tbody></table>`;
}
