/**
 * Scale x data-size interaction chart: grouped epoch-2 perplexity bars per
 * model scale (random / 12k / 36k) and the 36k-vs-12k advantage trend line
 * with percentage labels, computed from the table's perplexities.
 */

import { delta1236, ScaleRow } from "./data.js";
import { fmt, line, polyline, rect, scaleLinear, svgDocument, text, ticks } from "./svg.js";

export interface InteractionResult {
  svg: string;
  /** one label per scale, e.g. "-3.1%" */
  deltaLabels: string[];
  deltas: number[];
}

const BAR_COLORS = { random: "#9b9b9b", m12k: "#0072b2", m36k: "#d55e00" };

export function plotScaleInteraction(rows: ScaleRow[]): InteractionResult {
  if (rows.length === 0) {
    throw new Error("scale table has no rows");
  }
  const sorted = [...rows].sort((a, b) => a.scale - b.scale);
  const deltas = sorted.map(delta1236);
  const deltaLabels = deltas.map((d) => `${d >= 0 ? "+" : ""}${fmt(d, 1)}%`);

  const W = 560;
  const barPanelH = 300;
  const trendH = 170;
  const margin = { top: 28, right: 24, bottom: 30, left: 60 };
  const H = barPanelH + trendH;

  const parts: string[] = [];
  const x0 = margin.left;
  const x1 = W - margin.right;
  const groupW = (x1 - x0) / sorted.length;
  const barW = groupW / 4.5;

  const maxPpl = Math.max(...sorted.flatMap((r) => [r.randomPpl, r.m12kPpl, r.m36kPpl]));
  const yBar = scaleLinear(0, maxPpl * 1.12, barPanelH - margin.bottom, margin.top);

  parts.push(text(W / 2, 16, "epoch-2 perplexity by scale and music data volume",
                  { "text-anchor": "middle", "font-size": 13, "font-weight": "bold" }));
  parts.push(line(x0, yBar(0), x1, yBar(0)));
  for (const t of ticks(0, maxPpl * 1.12, 5)) {
    parts.push(line(x0 - 3, yBar(t), x0, yBar(t)));
    parts.push(text(x0 - 6, yBar(t) + 3, fmt(t, 0),
                    { "text-anchor": "end", "font-size": 9 }));
  }

  sorted.forEach((row, i) => {
    const cx = x0 + groupW * (i + 0.5);
    const bars: Array<[number, keyof typeof BAR_COLORS]> = [
      [row.randomPpl, "random"], [row.m12kPpl, "m12k"], [row.m36kPpl, "m36k"]];
    bars.forEach(([value, kind], j) => {
      const bx = cx + (j - 1.5) * barW + barW * 0.1;
      parts.push(rect(bx, yBar(value), barW * 0.8, yBar(0) - yBar(value),
                      { fill: BAR_COLORS[kind] }));
      parts.push(text(bx + barW * 0.4, yBar(value) - 4, fmt(value, 0),
                      { "text-anchor": "middle", "font-size": 9 }));
    });
    parts.push(text(cx, yBar(0) + 16, `d=${row.scale}`,
                    { "text-anchor": "middle", "font-size": 11 }));
  });
  // bar legend
  const legendLabels: Array<[string, string]> = [
    ["random", BAR_COLORS.random], ["maestro-12k", BAR_COLORS.m12k],
    ["maestro-36k", BAR_COLORS.m36k]];
  legendLabels.forEach(([label, color], i) => {
    const lx = x1 - 130;
    const ly = margin.top + i * 15;
    parts.push(rect(lx, ly - 8, 10, 10, { fill: color }));
    parts.push(text(lx + 15, ly, label, { "font-size": 10 }));
  });

  // trend panel: delta_12/36 across scales
  const ty0 = barPanelH + 26;
  const ty1 = H - 26;
  const dLo = Math.min(...deltas, 0);
  const dHi = Math.max(...deltas, 0);
  const dPad = (dHi - dLo || 1) * 0.25;
  const yTrend = scaleLinear(dLo - dPad, dHi + dPad, ty1, ty0);
  parts.push(text(W / 2, barPanelH + 14,
                  "advantage of 36k over 12k (positive = larger dataset wins)",
                  { "text-anchor": "middle", "font-size": 11 }));
  parts.push(line(x0, yTrend(0), x1, yTrend(0), { "stroke-dasharray": "4 3" }));
  parts.push(text(x0 - 6, yTrend(0) + 3, "0%", { "text-anchor": "end", "font-size": 9 }));
  const pts: Array<[number, number]> = sorted.map((row, i) =>
    [x0 + groupW * (i + 0.5), yTrend(deltas[i])]);
  parts.push(polyline(pts, { stroke: "#222", "stroke-width": 2 }));
  pts.forEach(([px, py], i) => {
    parts.push(rect(px - 3, py - 3, 6, 6, { fill: "#222" }));
    parts.push(text(px, py - 8, deltaLabels[i],
                    { "text-anchor": "middle", "font-size": 11, "font-weight": "bold" }));
  });

  return { svg: svgDocument(W, H, parts.join("\n")), deltaLabels, deltas };
}
