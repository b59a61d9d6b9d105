import { describe, expect, it } from "vitest";

import { buildCurves } from "../src/curves";
import { renderSvg } from "../src/svg";
import { MetricsTable } from "../src/csv";

function table(file: string, seed: number, ys: number[]): MetricsTable {
  const rows = ys.map((y, i) => ({
    algo: "dmcg",
    seed,
    env_steps: i * 10,
    task_metric_value: y,
  }));
  return { file, columns: Object.keys(rows[0]), rows };
}

function bandPoints(svg: string, algo: string): { x: number; y: number }[] {
  const g = new RegExp(`<g data-algo="${algo}">\\s*<polygon class="band" points="([^"]+)"`).exec(svg);
  expect(g).not.toBeNull();
  return g![1].split(" ").map((p) => {
    const [x, y] = p.split(",").map(Number);
    return { x, y };
  });
}

function yScale(svg: string): (px: number) => number {
  const dom = /data-y-domain="([^"]+)"/.exec(svg)!;
  const area = /data-plot-area="([^"]+)"/.exec(svg)!;
  const [yMin, yMax] = dom[1].split(",").map(Number);
  const [, top, , plotH] = area[1].split(",").map(Number);
  return (px: number) => yMin + (1 - (px - top) / plotH) * (yMax - yMin);
}

describe("renderSvg band geometry", () => {
  it("band half-width equals the hand-computed std across three seeds", () => {
    // per-x values {0,.2,.4}, {.3,.5,.7}, {.6,.8,1.0}: mean .2/.5/.8,
    // population std sqrt(((.2)^2 + 0 + (.2)^2) / 3) everywhere
    const handStd = Math.sqrt(0.08 / 3);
    const curves = buildCurves(
      [
        table("s0.csv", 0, [0.0, 0.3, 0.6]),
        table("s1.csv", 1, [0.2, 0.5, 0.8]),
        table("s2.csv", 2, [0.4, 0.7, 1.0]),
      ],
      "env_steps",
      "task_metric_value",
      1,
    );
    expect(curves[0].std[1]).toBeCloseTo(handStd, 12);

    const svg = renderSvg(curves);
    const pts = bandPoints(svg, "dmcg");
    expect(pts).toHaveLength(6); // 3 upper + 3 lower
    const toValue = yScale(svg);
    for (let i = 0; i < 3; i++) {
      const upper = toValue(pts[i].y);
      const lower = toValue(pts[5 - i].y);
      expect(pts[i].x).toBeCloseTo(pts[5 - i].x, 3);
      expect((upper - lower) / 2).toBeCloseTo(handStd, 4);
      expect((upper + lower) / 2).toBeCloseTo(curves[0].mean[i], 4);
    }
  });

  it("identical seed files give a zero-width band", () => {
    const curves = buildCurves(
      [table("s0.csv", 0, [0.1, 0.9]), table("s1.csv", 1, [0.1, 0.9])],
      "env_steps",
      "task_metric_value",
      1,
    );
    const svg = renderSvg(curves);
    const pts = bandPoints(svg, "dmcg");
    expect(pts[0].y).toBeCloseTo(pts[3].y, 6);
    expect(pts[1].y).toBeCloseTo(pts[2].y, 6);
  });

  it("is deterministic for identical inputs", () => {
    const mk = () =>
      renderSvg(
        buildCurves(
          [table("s0.csv", 0, [0.3, 0.4, 0.2])],
          "env_steps",
          "task_metric_value",
          5,
        ),
        { title: "hallway" },
      );
    expect(mk()).toBe(mk());
  });

  it("draws one group and one legend entry per algo", () => {
    const a = table("a.csv", 0, [0.5, 0.6]);
    const b = { ...table("b.csv", 0, [0.1, 0.2]) };
    b.rows = b.rows.map((r) => ({ ...r, algo: "vdn" }));
    const svg = renderSvg(
      buildCurves([a, b], "env_steps", "task_metric_value", 1),
    );
    expect(svg.match(/<g data-algo=/g)).toHaveLength(2);
    expect(svg).toContain("dmcg (1 seeds)");
    expect(svg).toContain("vdn (1 seeds)");
  });
});
