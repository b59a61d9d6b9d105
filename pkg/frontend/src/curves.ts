import { MetricsTable } from "./csv";

/** One algorithm's aggregated learning curve across seeds. */
export interface AlgoCurve {
  algo: string;
  x: number[];
  mean: number[];
  std: number[];
  seeds: number;
}

/** Trailing moving average; the first w-1 points average what exists so far. */
export function movingAverage(ys: number[], window: number): number[] {
  if (window <= 1) return ys.slice();
  const out: number[] = [];
  let sum = 0;
  for (let i = 0; i < ys.length; i++) {
    sum += ys[i];
    if (i >= window) sum -= ys[i - window];
    out.push(sum / Math.min(i + 1, window));
  }
  return out;
}

interface SeedSeries {
  xs: number[];
  ys: number[];
}

/**
 * Group rows by algo and seed, smooth each seed series, then aggregate
 * mean and population standard deviation over seeds at every x value
 * shared by all seeds of that algo.
 */
export function buildCurves(
  tables: MetricsTable[],
  xCol: string,
  yCol: string,
  window: number,
): AlgoCurve[] {
  const byAlgo = new Map<string, Map<string, SeedSeries>>();
  for (const table of tables) {
    for (const row of table.rows) {
      const algo = String(row["algo"]);
      const seedKey = `${table.file}:${String(row["seed"])}`;
      const x = Number(row[xCol]);
      const y = Number(row[yCol]);
      if (!Number.isFinite(x) || !Number.isFinite(y)) continue;
      let seeds = byAlgo.get(algo);
      if (!seeds) byAlgo.set(algo, (seeds = new Map()));
      let series = seeds.get(seedKey);
      if (!series) seeds.set(seedKey, (series = { xs: [], ys: [] }));
      series.xs.push(x);
      series.ys.push(y);
    }
  }

  const curves: AlgoCurve[] = [];
  for (const algo of [...byAlgo.keys()].sort()) {
    const seeds = [...byAlgo.get(algo)!.values()];
    for (const s of seeds) {
      const order = s.xs.map((_, i) => i).sort((a, b) => s.xs[a] - s.xs[b]);
      s.xs = order.map((i) => s.xs[i]);
      s.ys = movingAverage(order.map((i) => s.ys[i]), window);
    }
    // keep only x values present in every seed so the band is well defined
    let common = new Set(seeds[0].xs);
    for (const s of seeds.slice(1)) {
      common = new Set(s.xs.filter((x) => common.has(x)));
    }
    const xs = [...common].sort((a, b) => a - b);
    const mean: number[] = [];
    const std: number[] = [];
    for (const x of xs) {
      const vals = seeds.map((s) => s.ys[s.xs.indexOf(x)]);
      const m = vals.reduce((a, b) => a + b, 0) / vals.length;
      const v = vals.reduce((a, b) => a + (b - m) * (b - m), 0) / vals.length;
      mean.push(m);
      std.push(Math.sqrt(v));
    }
    curves.push({ algo, x: xs, mean, std, seeds: seeds.length });
  }
  return curves;
}
