/**
 * Minimal SVG string construction: enough for line charts and grouped bars,
 * with deterministic output bytes for a fixed input (fixed number
 * formatting, no timestamps, no randomness).
 */

export function fmt(x: number, digits = 2): string {
  const s = x.toFixed(digits);
  return s === "-0.00" ? "0.00" : s;
}

export function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface Attrs {
  [key: string]: string | number;
}

export function tag(name: string, attrs: Attrs, body = ""): string {
  const parts = Object.entries(attrs)
    .map(([k, v]) => `${k}="${typeof v === "number" ? fmt(v) : esc(v)}"`)
    .join(" ");
  return body === "" && name !== "text"
    ? `<${name} ${parts}/>`
    : `<${name} ${parts}>${body}</${name}>`;
}

export function text(x: number, y: number, s: string, attrs: Attrs = {}): string {
  return tag("text", { x, y, "font-family": "sans-serif", ...attrs }, esc(s));
}

export function line(x1: number, y1: number, x2: number, y2: number,
                     attrs: Attrs = {}): string {
  return tag("line", { x1, y1, x2, y2, stroke: "#444", "stroke-width": 1, ...attrs });
}

export function polyline(points: Array<[number, number]>, attrs: Attrs = {}): string {
  const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
  return tag("polyline", { points: pts, fill: "none", "stroke-width": 1.8, ...attrs });
}

export function rect(x: number, y: number, w: number, h: number,
                     attrs: Attrs = {}): string {
  return tag("rect", { x, y, width: w, height: h, ...attrs });
}

export function svgDocument(width: number, height: number, body: string): string {
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
         `height="${height}" viewBox="0 0 ${width} ${height}">\n${body}\n</svg>\n`;
}

/** Linear map from [lo, hi] to [a, b]. */
export function scaleLinear(lo: number, hi: number, a: number, b: number) {
  const span = hi - lo || 1;
  return (v: number) => a + ((v - lo) / span) * (b - a);
}

/** Round axis ticks: lo, hi and ~n stops in between. */
export function ticks(lo: number, hi: number, n = 5): number[] {
  const span = hi - lo || 1;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const candidates = [step, 2 * step, 5 * step, 10 * step];
  const chosen = candidates.find((c) => span / c <= n) ?? 10 * step;
  const out: number[] = [];
  for (let v = Math.ceil(lo / chosen) * chosen; v <= hi + 1e-9; v += chosen) {
    out.push(Number(v.toFixed(10)));
  }
  return out;
}

// a colorblind-safe cycle; conditions are assigned by sorted name so the
// same condition gets the same color in every panel
const PALETTE = ["#0072b2", "#d55e00", "#009e73", "#cc79a7", "#e69f00",
                 "#56b4e9", "#f0e442", "#000000"];

export function colorMap(names: string[]): Map<string, string> {
  const sorted = [...new Set(names)].sort();
  return new Map(sorted.map((n, i) => [n, PALETTE[i % PALETTE.length]]));
}
