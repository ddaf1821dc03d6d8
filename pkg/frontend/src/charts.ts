/* SVG chart builders: histogram, pie, cluster scatter.
 *
 * Pure functions from API-provided numbers to view models and SVG
 * markup, so they are testable without a DOM. The scatter plots cluster
 * centroids decoded to source units (size encodes cluster population);
 * object-level rows never leave the engine. */

export interface HistogramBin {
  x0: number;
  x1: number;
  count: number;
}

export interface PieSlice {
  label: string;
  value: number;
  fraction: number;
  startAngle: number;
  endAngle: number;
  color: string;
}

export interface ScatterPoint {
  x: number;
  y: number;
  r: number;
  color: string;
  cluster: number;
}

const SVG_W = 360;
const SVG_H = 220;
const PAD = 28;

/** k visually distinct colors; stable for a given k. */
export function clusterPalette(k: number): string[] {
  const colors: string[] = [];
  for (let i = 0; i < k; i++) {
    const hue = Math.round((360 * i) / Math.max(k, 1));
    colors.push(`hsl(${hue}, 70%, 45%)`);
  }
  return colors;
}

export function histogramBins(values: number[], binCount = 10): HistogramBin[] {
  if (values.length === 0) return [];
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  const width = span / binCount;
  const bins: HistogramBin[] = Array.from({ length: binCount }, (_, i) => ({
    x0: lo + i * width,
    x1: lo + (i + 1) * width,
    count: 0,
  }));
  for (const v of values) {
    let idx = Math.floor((v - lo) / width);
    if (idx >= binCount) idx = binCount - 1;
    if (idx < 0) idx = 0;
    bins[idx]!.count += 1;
  }
  return bins;
}

export function histogramSvg(values: number[], binCount = 10): string {
  const bins = histogramBins(values, binCount);
  if (bins.length === 0) return emptySvg("no cells");
  const maxCount = Math.max(...bins.map((b) => b.count), 1);
  const barW = (SVG_W - 2 * PAD) / bins.length;
  const bars = bins
    .map((b, i) => {
      const h = ((SVG_H - 2 * PAD) * b.count) / maxCount;
      const x = PAD + i * barW;
      const y = SVG_H - PAD - h;
      const title = `[${fmt(b.x0)}, ${fmt(b.x1)}): ${b.count}`;
      return `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(barW * 0.9)}" height="${fmt(h)}" ` +
        `fill="hsl(210, 60%, 50%)"><title>${title}</title></rect>`;
    })
    .join("");
  return svgShell(bars + axis());
}

export function pieSlices(entries: { label: string; value: number }[]): PieSlice[] {
  const total = entries.reduce((acc, e) => acc + e.value, 0);
  if (total <= 0) return [];
  const palette = clusterPalette(entries.length);
  let angle = 0;
  return entries.map((e, i) => {
    const fraction = e.value / total;
    const slice: PieSlice = {
      label: e.label,
      value: e.value,
      fraction,
      startAngle: angle,
      endAngle: angle + fraction * 2 * Math.PI,
      color: palette[i]!,
    };
    angle = slice.endAngle;
    return slice;
  });
}

export function pieSvg(entries: { label: string; value: number }[]): string {
  const slices = pieSlices(entries);
  if (slices.length === 0) return emptySvg("no data");
  const cx = SVG_H / 2;
  const cy = SVG_H / 2;
  const r = SVG_H / 2 - 8;
  const paths = slices
    .map((s) => {
      if (s.fraction >= 0.999999) {
        return `<circle cx="${cx}" cy="${cy}" r="${r}" fill="${s.color}">` +
          `<title>${esc(s.label)}: ${s.value}</title></circle>`;
      }
      const x0 = cx + r * Math.cos(s.startAngle - Math.PI / 2);
      const y0 = cy + r * Math.sin(s.startAngle - Math.PI / 2);
      const x1 = cx + r * Math.cos(s.endAngle - Math.PI / 2);
      const y1 = cy + r * Math.sin(s.endAngle - Math.PI / 2);
      const large = s.fraction > 0.5 ? 1 : 0;
      return `<path d="M ${cx} ${cy} L ${fmt(x0)} ${fmt(y0)} ` +
        `A ${r} ${r} 0 ${large} 1 ${fmt(x1)} ${fmt(y1)} Z" fill="${s.color}">` +
        `<title>${esc(s.label)}: ${s.value}</title></path>`;
    })
    .join("");
  const legend = slices
    .map((s, i) =>
      `<g transform="translate(${SVG_H + 12}, ${14 + i * 18})">` +
      `<rect width="12" height="12" fill="${s.color}"/>` +
      `<text x="17" y="10" font-size="11">${esc(s.label)} (${s.value})</text></g>`)
    .join("");
  return svgShell(paths + legend);
}

/** Decode one encoded centroid coordinate back to source units. */
export function decodeCentroid(
  column: string,
  value: number,
  report: Record<string, { kind: string; mean?: number; std?: number }>,
): number {
  const source = column.split("=")[0]!;
  const enc = report[source];
  if (enc && enc.kind === "zscore") {
    return value * (enc.std ?? 0) + (enc.mean ?? 0);
  }
  return value; // one-hot columns read as category shares
}

export function scatterPoints(
  clustering: {
    centroids: number[][];
    feature_columns: string[];
    encoding_report: Record<string, { kind: string; mean?: number; std?: number }>;
    assignment: number[];
  },
  xColumn: string,
  yColumn: string,
): ScatterPoint[] {
  const xi = clustering.feature_columns.indexOf(xColumn);
  const yi = clustering.feature_columns.indexOf(yColumn);
  if (xi < 0 || yi < 0) return [];
  const k = clustering.centroids.length;
  const palette = clusterPalette(k);
  const sizes = new Array<number>(k).fill(0);
  for (const a of clustering.assignment) sizes[a] = (sizes[a] ?? 0) + 1;
  return clustering.centroids.map((c, j) => ({
    x: decodeCentroid(xColumn, c[xi]!, clustering.encoding_report),
    y: decodeCentroid(yColumn, c[yi]!, clustering.encoding_report),
    r: 4 + 2 * Math.sqrt(sizes[j] ?? 0),
    color: palette[j]!,
    cluster: j,
  }));
}

export function scatterSvg(points: ScatterPoint[], xLabel: string, yLabel: string): string {
  if (points.length === 0) return emptySvg("no clustering");
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const [xLo, xHi] = [Math.min(...xs), Math.max(...xs)];
  const [yLo, yHi] = [Math.min(...ys), Math.max(...ys)];
  const sx = (v: number) => PAD + ((SVG_W - 2 * PAD) * (v - xLo)) / (xHi - xLo || 1);
  const sy = (v: number) => SVG_H - PAD - ((SVG_H - 2 * PAD) * (v - yLo)) / (yHi - yLo || 1);
  const dots = points
    .map((p) =>
      `<circle cx="${fmt(sx(p.x))}" cy="${fmt(sy(p.y))}" r="${fmt(p.r)}" fill="${p.color}" ` +
      `fill-opacity="0.8"><title>cluster ${p.cluster}: (${fmt(p.x)}, ${fmt(p.y)})</title></circle>`)
    .join("");
  const labels =
    `<text x="${SVG_W / 2}" y="${SVG_H - 6}" font-size="11" text-anchor="middle">${esc(xLabel)}</text>` +
    `<text x="10" y="${SVG_H / 2}" font-size="11" transform="rotate(-90 10 ${SVG_H / 2})" ` +
    `text-anchor="middle">${esc(yLabel)}</text>`;
  return svgShell(dots + axis() + labels);
}

function svgShell(inner: string): string {
  return `<svg viewBox="0 0 ${SVG_W} ${SVG_H}" xmlns="http://www.w3.org/2000/svg">${inner}</svg>`;
}

function axis(): string {
  return `<line x1="${PAD}" y1="${SVG_H - PAD}" x2="${SVG_W - PAD}" y2="${SVG_H - PAD}" stroke="#888"/>` +
    `<line x1="${PAD}" y1="${PAD}" x2="${PAD}" y2="${SVG_H - PAD}" stroke="#888"/>`;
}

function emptySvg(message: string): string {
  return svgShell(`<text x="${SVG_W / 2}" y="${SVG_H / 2}" text-anchor="middle" fill="#777">${esc(message)}</text>`);
}

function fmt(v: number): string {
  return Number.isInteger(v) ? String(v) : v.toFixed(2);
}

export function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
