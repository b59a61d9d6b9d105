import { AlgoCurve } from "./curves";

export interface PlotOptions {
  width?: number;
  height?: number;
  xLabel?: string;
  yLabel?: string;
  title?: string;
}

const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
];

const MARGIN = { left: 62, right: 16, top: 18, bottom: 46 };

/** Short deterministic number format for coordinates and tick labels. */
function fmt(v: number): string {
  if (!Number.isFinite(v)) return "0";
  const s = +v.toPrecision(6);
  return String(s);
}

function linTicks(lo: number, hi: number, n = 5): number[] {
  const out: number[] = [];
  for (let i = 0; i <= n; i++) out.push(lo + ((hi - lo) * i) / n);
  return out;
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/**
 * Render learning curves as a standalone SVG string: per-algo mean line
 * plus a +-1 std band. Output is a pure function of the inputs.
 */
export function renderSvg(curves: AlgoCurve[], opts: PlotOptions = {}): string {
  const width = opts.width ?? 640;
  const height = opts.height ?? 400;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  let xMin = Infinity;
  let xMax = -Infinity;
  let yMin = Infinity;
  let yMax = -Infinity;
  for (const c of curves) {
    for (let i = 0; i < c.x.length; i++) {
      xMin = Math.min(xMin, c.x[i]);
      xMax = Math.max(xMax, c.x[i]);
      yMin = Math.min(yMin, c.mean[i] - c.std[i]);
      yMax = Math.max(yMax, c.mean[i] + c.std[i]);
    }
  }
  if (!Number.isFinite(xMin)) {
    xMin = 0;
    xMax = 1;
    yMin = 0;
    yMax = 1;
  }
  if (xMax === xMin) xMax = xMin + 1;
  if (yMax === yMin) {
    yMin -= 1;
    yMax += 1;
  }
  const yPad = 0.05 * (yMax - yMin);
  yMin -= yPad;
  yMax += yPad;

  const sx = (v: number) => MARGIN.left + ((v - xMin) / (xMax - xMin)) * plotW;
  const sy = (v: number) => MARGIN.top + (1 - (v - yMin) / (yMax - yMin)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="11" ` +
      `data-x-domain="${fmt(xMin)},${fmt(xMax)}" data-y-domain="${fmt(yMin)},${fmt(yMax)}" ` +
      `data-plot-area="${MARGIN.left},${MARGIN.top},${fmt(plotW)},${fmt(plotH)}">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);

  // axes and ticks
  const axis: string[] = [];
  axis.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top + plotH}" x2="${MARGIN.left + plotW}" ` +
      `y2="${MARGIN.top + plotH}" stroke="black"/>`,
  );
  axis.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" ` +
      `y2="${MARGIN.top + plotH}" stroke="black"/>`,
  );
  for (const t of linTicks(xMin, xMax)) {
    const px = sx(t);
    axis.push(
      `<line x1="${fmt(px)}" y1="${MARGIN.top + plotH}" x2="${fmt(px)}" y2="${MARGIN.top + plotH + 5}" stroke="black"/>`,
    );
    axis.push(
      `<text x="${fmt(px)}" y="${MARGIN.top + plotH + 18}" text-anchor="middle">${fmt(t)}</text>`,
    );
  }
  for (const t of linTicks(yMin, yMax)) {
    const py = sy(t);
    axis.push(
      `<line x1="${MARGIN.left - 5}" y1="${fmt(py)}" x2="${MARGIN.left}" y2="${fmt(py)}" stroke="black"/>`,
    );
    axis.push(
      `<text x="${MARGIN.left - 8}" y="${fmt(py + 4)}" text-anchor="end">${fmt(t)}</text>`,
    );
  }
  axis.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${height - 8}" text-anchor="middle">${esc(
      opts.xLabel ?? "env_steps",
    )}</text>`,
  );
  axis.push(
    `<text x="14" y="${MARGIN.top + plotH / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 14 ${MARGIN.top + plotH / 2})">${esc(opts.yLabel ?? "value")}</text>`,
  );
  if (opts.title) {
    axis.push(
      `<text x="${MARGIN.left + plotW / 2}" y="12" text-anchor="middle">${esc(opts.title)}</text>`,
    );
  }
  parts.push(axis.join(""));

  // curves, one group per algo: band polygon then mean polyline
  curves.forEach((c, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const upper = c.x.map((x, i) => `${fmt(sx(x))},${fmt(sy(c.mean[i] + c.std[i]))}`);
    const lower = c.x
      .map((x, i) => `${fmt(sx(x))},${fmt(sy(c.mean[i] - c.std[i]))}`)
      .reverse();
    const line = c.x.map((x, i) => `${fmt(sx(x))},${fmt(sy(c.mean[i]))}`);
    parts.push(`<g data-algo="${esc(c.algo)}">`);
    parts.push(
      `<polygon class="band" points="${upper.concat(lower).join(" ")}" ` +
        `fill="${color}" fill-opacity="0.2" stroke="none"/>`,
    );
    parts.push(
      `<polyline class="mean" points="${line.join(" ")}" fill="none" ` +
        `stroke="${color}" stroke-width="2"/>`,
    );
    parts.push(`</g>`);
  });

  // legend, top-left inside the plot area
  curves.forEach((c, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const y = MARGIN.top + 14 + 16 * idx;
    parts.push(
      `<line x1="${MARGIN.left + 8}" y1="${y - 4}" x2="${MARGIN.left + 28}" y2="${y - 4}" ` +
        `stroke="${color}" stroke-width="2"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left + 33}" y="${y}">${esc(c.algo)} (${c.seeds} seeds)</text>`,
    );
  });

  parts.push(`</svg>`);
  return parts.join("\n") + "\n";
}
