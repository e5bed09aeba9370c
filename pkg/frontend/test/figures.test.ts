import { describe, expect, it } from "vitest";

import { delta1236, parseMetricsJsonl, parseScaleTsv } from "../src/data.js";
import { plotLearningCurves } from "../src/learningCurves.js";
import { plotScaleInteraction } from "../src/scaleInteraction.js";

// the published scale-interaction table, as `stats --table 8 --out` writes it
const TABLE8_TSV = [
  "scale\trandom\tmaestro-12k (dR)\tmaestro-36k (dR)\tdelta_12/36",
  "d=16\t418.9\t364.3 (-13.0%)\t375.4 (-10.4%)\t-3.0%",
  "d=32\t263.3\t222.2 (-15.6%)\t215.0 (-18.4%)\t+3.2%",
  "d=64\t167.2\t149.1 (-10.8%)\t140.0 (-16.3%)\t+6.1%",
].join("\n") + "\n";

function metricsFixture(): string {
  const rows: string[] = [];
  const conditions: Array<[string, number[]]> = [
    ["random", [716, 166, 112]],
    ["pretrained", [534, 148, 104]],
    ["pipeline", [214, 130, 100]],
  ];
  for (const [condition, ppls] of conditions) {
    ppls.forEach((ppl, epoch) => {
      rows.push(JSON.stringify({
        condition, seed: 42, d_model: 16, phase_index: 1, phase: "prose",
        epoch, train_loss: 0, val_loss: Math.log(ppl), val_ppl: ppl,
        steps: 100 * (epoch + 1), micro_batches: 200 * (epoch + 1), lr: 1e-3,
      }));
    });
  }
  return rows.join("\n") + "\n";
}

describe("scale interaction figure", () => {
  it("reproduces the published delta_12/36 labels to 0.1 points", () => {
    const rows = parseScaleTsv(TABLE8_TSV);
    const { deltaLabels, deltas, svg } = plotScaleInteraction(rows);
    expect(Math.abs(deltas[0] - -3.1)).toBeLessThan(0.1);
    expect(Math.abs(deltas[1] - 3.3)).toBeLessThan(0.1);
    expect(Math.abs(deltas[2] - 6.1)).toBeLessThan(0.1);
    expect(deltaLabels).toEqual(["-3.0%", "+3.2%", "+6.1%"]);
    for (const label of deltaLabels) {
      expect(svg).toContain(label);
    }
    expect(svg.startsWith("<svg")).toBe(true);
  });

  it("computes the delta with the published sign convention", () => {
    // positive = 36k better (lower perplexity)
    expect(delta1236({ scale: 64, randomPpl: 167.2, m12kPpl: 149.1,
                       m36kPpl: 140.0 })).toBeGreaterThan(0);
    expect(delta1236({ scale: 16, randomPpl: 418.9, m12kPpl: 364.3,
                       m36kPpl: 375.4 })).toBeLessThan(0);
  });

  it("rejects an empty table", () => {
    expect(() => plotScaleInteraction([])).toThrow(/no rows/);
    expect(() => parseScaleTsv("")).toThrow(/empty/);
  });

  it("is deterministic for a fixed input", () => {
    const rows = parseScaleTsv(TABLE8_TSV);
    expect(plotScaleInteraction(rows).svg).toBe(plotScaleInteraction(rows).svg);
  });
});

describe("learning curves figure", () => {
  it("renders a three-condition fixture", () => {
    const rows = parseMetricsJsonl(metricsFixture());
    const svg = plotLearningCurves(rows);
    expect(svg.startsWith("<svg")).toBe(true);
    const polylines = svg.match(/<polyline /g) ?? [];
    expect(polylines.length).toBe(3);
    expect(svg).toContain("E0");
    expect(svg).toContain("best: pipeline");
    expect(svg).toContain("random");
  });

  it("leaves a gap for a missing epoch instead of interpolating", () => {
    const base = parseMetricsJsonl(metricsFixture());
    const withGap = base.filter(
      (r) => !(r.condition === "pretrained" && r.epoch === 1));
    const svg = plotLearningCurves(withGap);
    // the pretrained line splits into two one-point segments (markers),
    // so only two real polylines remain
    const polylines = svg.match(/<polyline /g) ?? [];
    expect(polylines.length).toBe(2);
  });

  it("keeps condition colors stable across panels", () => {
    const rows = parseMetricsJsonl(metricsFixture());
    const second = rows.map((r) => ({ ...r, d_model: 32, val_ppl: r.val_ppl / 2,
                                      val_loss: r.val_loss }));
    const svg = plotLearningCurves([...rows, ...second]);
    expect(svg).toContain("d = 16");
    expect(svg).toContain("d = 32");
    // each condition's color appears once per panel plus once in the legend
    for (const color of ["#0072b2", "#d55e00", "#009e73"]) {
      const uses = svg.match(new RegExp(color, "g")) ?? [];
      expect(uses.length).toBeGreaterThanOrEqual(3);
    }
  });

  it("fails cleanly when the requested phase is absent", () => {
    const rows = parseMetricsJsonl(metricsFixture());
    expect(() => plotLearningCurves(rows, { phase: "music" }))
      .toThrow(/no 'music' epochs/);
  });

  it("averages seeds of the same condition", () => {
    const rows = parseMetricsJsonl(metricsFixture());
    const twoSeeds = [...rows, ...rows.map((r) => ({ ...r, seed: 123,
                                                     val_ppl: r.val_ppl + 10 }))];
    const svg = plotLearningCurves(twoSeeds);
    expect((svg.match(/<polyline /g) ?? []).length).toBe(3);
  });
});

describe("metrics parser", () => {
  it("rejects rows missing required fields", () => {
    expect(() => parseMetricsJsonl('{"condition": "x"}\n'))
      .toThrow(/missing field/);
  });
});
