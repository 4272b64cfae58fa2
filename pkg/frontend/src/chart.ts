/** Dependency-free SVG line chart for the per-iteration quality series. */

export interface ChartPoint {
  x: number;
  y: number;
}

export interface ChartOptions {
  width?: number;
  height?: number;
  yMin?: number;
  yMax?: number;
  label?: string;
}

const PAD = 28;

export function lineChartSvg(points: ChartPoint[], opts: ChartOptions = {}): string {
  const width = opts.width ?? 520;
  const height = opts.height ?? 180;
  const yMin = opts.yMin ?? 0;
  const yMax = opts.yMax ?? 1;
  if (points.length === 0) {
    return (
      `<svg class="chart" viewBox="0 0 ${width} ${height}" role="img">` +
      `<text x="${width / 2}" y="${height / 2}" text-anchor="middle" class="chart-empty">` +
      `no data yet</text></svg>`
    );
  }
  const xMax = Math.max(1, ...points.map((p) => p.x));
  const sx = (x: number) => PAD + (x / xMax) * (width - 2 * PAD);
  const sy = (y: number) =>
    height - PAD - ((y - yMin) / (yMax - yMin || 1)) * (height - 2 * PAD);
  const path = points
    .map((p, i) => `${i === 0 ? "M" : "L"}${sx(p.x).toFixed(1)},${sy(p.y).toFixed(1)}`)
    .join(" ");
  const dots = points
    .map(
      (p) =>
        `<circle cx="${sx(p.x).toFixed(1)}" cy="${sy(p.y).toFixed(1)}" r="3">` +
        `<title>iteration ${p.x}: ${p.y.toFixed(4)}</title></circle>`,
    )
    .join("");
  const gridLines = [0, 0.25, 0.5, 0.75, 1]
    .filter((v) => v >= yMin && v <= yMax)
    .map(
      (v) =>
        `<line x1="${PAD}" y1="${sy(v).toFixed(1)}" x2="${width - PAD}" ` +
        `y2="${sy(v).toFixed(1)}" class="chart-grid"></line>` +
        `<text x="2" y="${(sy(v) + 4).toFixed(1)}" class="chart-tick">${v}</text>`,
    )
    .join("");
  const label = opts.label
    ? `<text x="${width / 2}" y="14" text-anchor="middle" class="chart-label">${opts.label}</text>`
    : "";
  return (
    `<svg class="chart" viewBox="0 0 ${width} ${height}" role="img">` +
    `${gridLines}${label}<path d="${path}" class="chart-line" fill="none"></path>${dots}</svg>`
  );
}
