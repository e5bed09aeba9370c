/**
 * Learning curves: validation perplexity vs epoch, one line per condition,
 * one panel per model scale, with the best condition annotated per panel.
 * Seeds of the same condition are averaged per epoch; a missing epoch
 * breaks the line into segments (no interpolation across gaps).
 */

import { MetricsRow } from "./data.js";
import { colorMap, fmt, line, polyline, rect, scaleLinear, svgDocument, text,
         ticks } from "./svg.js";

export interface CurveOptions {
  phase?: string;          // which phase's epochs to plot (default "prose")
  panelWidth?: number;
  panelHeight?: number;
  logScale?: boolean;
}

interface Series {
  condition: string;
  points: Array<[number, number]>;  // (epoch, mean val ppl), epoch-sorted
}

function meanSeries(rows: MetricsRow[], condition: string): Series {
  const byEpoch = new Map<number, number[]>();
  for (const r of rows) {
    if (r.condition !== condition) continue;
    const list = byEpoch.get(r.epoch) ?? [];
    list.push(r.val_ppl);
    byEpoch.set(r.epoch, list);
  }
  const points = [...byEpoch.entries()]
    .map(([e, v]) => [e, v.reduce((a, b) => a + b, 0) / v.length] as [number, number])
    .sort((a, b) => a[0] - b[0]);
  return { condition, points };
}

/** Split on epoch gaps so missing epochs render as breaks. */
function segments(points: Array<[number, number]>): Array<Array<[number, number]>> {
  const out: Array<Array<[number, number]>> = [];
  let current: Array<[number, number]> = [];
  let prev: number | null = null;
  for (const p of points) {
    if (prev !== null && p[0] - prev > 1) {
      if (current.length) out.push(current);
      current = [];
    }
    current.push(p);
    prev = p[0];
  }
  if (current.length) out.push(current);
  return out;
}

export function plotLearningCurves(rows: MetricsRow[],
                                   options: CurveOptions = {}): string {
  const phase = options.phase ?? "prose";
  const phaseRows = rows.filter((r) => r.phase === phase);
  if (phaseRows.length === 0) {
    throw new Error(`no '${phase}' epochs in the metrics export`);
  }
  const scales = [...new Set(phaseRows.map((r) => r.d_model))].sort((a, b) => a - b);
  const conditions = [...new Set(phaseRows.map((r) => r.condition))].sort();
  const colors = colorMap(conditions);

  const W = options.panelWidth ?? 320;
  const H = options.panelHeight ?? 260;
  const margin = { top: 34, right: 16, bottom: 38, left: 56 };
  const legendH = 18 * conditions.length + 8;
  const width = W * scales.length;
  const height = H + legendH;

  const parts: string[] = [];
  scales.forEach((scale, pi) => {
    const panelRows = phaseRows.filter((r) => r.d_model === scale);
    const panelConds = [...new Set(panelRows.map((r) => r.condition))].sort();
    const series = panelConds.map((c) => meanSeries(panelRows, c))
      .filter((s) => s.points.length > 0);
    const x0 = pi * W + margin.left;
    const x1 = (pi + 1) * W - margin.right;
    const y0 = margin.top;
    const y1 = H - margin.bottom;

    const epochs = series.flatMap((s) => s.points.map((p) => p[0]));
    const ppls = series.flatMap((s) => s.points.map((p) => p[1]));
    const eLo = Math.min(...epochs);
    const eHi = Math.max(...epochs, eLo + 1);
    const pLo = Math.min(...ppls);
    const pHi = Math.max(...ppls);
    const pad = (pHi - pLo || 1) * 0.06;
    const xs = scaleLinear(eLo, eHi, x0, x1);
    const ys = scaleLinear(pLo - pad, pHi + pad, y1, y0);

    parts.push(text((x0 + x1) / 2, 16, scale ? `d = ${scale}` : "curves",
                    { "text-anchor": "middle", "font-size": 13, "font-weight": "bold" }));
    // axes
    parts.push(line(x0, y1, x1, y1));
    parts.push(line(x0, y0, x0, y1));
    for (const t of ticks(pLo - pad, pHi + pad, 5)) {
      parts.push(line(x0 - 3, ys(t), x0, ys(t)));
      parts.push(text(x0 - 6, ys(t) + 3, fmt(t, t < 10 ? 1 : 0),
                      { "text-anchor": "end", "font-size": 9 }));
    }
    for (let e = eLo; e <= eHi; e++) {
      parts.push(line(xs(e), y1, xs(e), y1 + 3));
      parts.push(text(xs(e), y1 + 13, `E${e}`,
                      { "text-anchor": "middle", "font-size": 9 }));
    }
    parts.push(text((x0 + x1) / 2, H - 8, "epoch",
                    { "text-anchor": "middle", "font-size": 10 }));
    if (pi === 0) {
      parts.push(text(14, (y0 + y1) / 2, "val PPL",
                      { "text-anchor": "middle", "font-size": 10,
                        transform: `rotate(-90 14 ${(y0 + y1) / 2})` }));
    }
    // curves, epoch gaps preserved
    for (const s of series) {
      const color = colors.get(s.condition)!;
      for (const seg of segments(s.points)) {
        if (seg.length === 1) {
          const [e, p] = seg[0];
          parts.push(rect(xs(e) - 1.5, ys(p) - 1.5, 3, 3, { fill: color }));
        } else {
          parts.push(polyline(seg.map(([e, p]) => [xs(e), ys(p)]),
                              { stroke: color }));
        }
      }
    }
    // best condition at the last common epoch
    const finals = series
      .map((s) => ({ c: s.condition, p: s.points[s.points.length - 1][1] }))
      .sort((a, b) => a.p - b.p);
    if (finals.length) {
      const best = finals[0];
      parts.push(text(x1, y0 + 10, `best: ${best.c} (${fmt(best.p, 1)})`,
                      { "text-anchor": "end", "font-size": 10,
                        fill: colors.get(best.c)! }));
    }
  });

  // legend below the panels
  conditions.forEach((c, i) => {
    const y = H + 14 + i * 18;
    parts.push(rect(margin.left, y - 8, 14, 3, { fill: colors.get(c)! }));
    parts.push(text(margin.left + 20, y - 3, c, { "font-size": 11 }));
  });

  return svgDocument(width, height, parts.join("\n"));
}
