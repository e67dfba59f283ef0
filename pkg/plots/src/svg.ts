// Small deterministic SVG helpers shared by the figure scripts.
// Everything renders into plain strings; no DOM, no dependencies.

export interface Extent {
  min: number;
  max: number;
}

export function extent(values: number[]): Extent {
  let min = Infinity;
  let max = -Infinity;
  for (const v of values) {
    if (v < min) min = v;
    if (v > max) max = v;
  }
  return { min, max };
}

// Linear map from a data extent to pixel coordinates. A zero-span extent
// maps everything to the midpoint so constant columns still render.
export function scale(e: Extent, lo: number, hi: number): (v: number) => number {
  const span = e.max - e.min;
  if (span === 0) {
    const mid = (lo + hi) / 2;
    return () => mid;
  }
  return v => lo + ((v - e.min) / span) * (hi - lo);
}

export function fmt(v: number): string {
  if (!Number.isFinite(v)) return String(v);
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(3);
  return String(Number(v.toPrecision(6)));
}

export function ticks(e: Extent, count: number): number[] {
  if (e.max === e.min) return [e.min];
  const out: number[] = [];
  for (let i = 0; i <= count; i++) {
    out.push(e.min + ((e.max - e.min) * i) / count);
  }
  return out;
}

const RAMP: Array<[number, number, number]> = [
  [68, 1, 84],
  [59, 82, 139],
  [33, 145, 140],
  [94, 201, 98],
  [253, 231, 37],
];

export function colorRamp(t: number): string {
  const u = Math.min(1, Math.max(0, t)) * (RAMP.length - 1);
  const i = Math.min(RAMP.length - 2, Math.floor(u));
  const f = u - i;
  const a = RAMP[i] as [number, number, number];
  const b = RAMP[i + 1] as [number, number, number];
  const mix = (x: number, y: number) => Math.round(x + (y - x) * f);
  const hex = (x: number) => x.toString(16).padStart(2, "0");
  return `#${hex(mix(a[0], b[0]))}${hex(mix(a[1], b[1]))}${hex(mix(a[2], b[2]))}`;
}

export function svgDocument(width: number, height: number, body: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="11">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n` +
    body +
    "</svg>\n"
  );
}

export function text(x: number, y: number, s: string, attrs = ""): string {
  return `<text x="${fmt(x)}" y="${fmt(y)}" ${attrs}>${s}</text>\n`;
}

// Bottom and left axes with tick labels; sx/sy are the pixel scales.
export function axes(
  xe: Extent,
  ye: Extent,
  sx: (v: number) => number,
  sy: (v: number) => number,
  x0: number,
  y0: number,
  xLabel: string,
  yLabel: string
): string {
  let out = "";
  const xTicks = ticks(xe, 4);
  const yTicks = ticks(ye, 4);
  out += `<line x1="${fmt(sx(xe.min))}" y1="${fmt(y0)}" x2="${fmt(sx(xe.max))}" y2="${fmt(y0)}" stroke="black"/>\n`;
  out += `<line x1="${fmt(x0)}" y1="${fmt(sy(ye.min))}" x2="${fmt(x0)}" y2="${fmt(sy(ye.max))}" stroke="black"/>\n`;
  for (const t of xTicks) {
    out += `<line x1="${fmt(sx(t))}" y1="${fmt(y0)}" x2="${fmt(sx(t))}" y2="${fmt(y0 + 4)}" stroke="black"/>\n`;
    out += text(sx(t), y0 + 16, fmt(t), 'text-anchor="middle"');
  }
  for (const t of yTicks) {
    out += `<line x1="${fmt(x0 - 4)}" y1="${fmt(sy(t))}" x2="${fmt(x0)}" y2="${fmt(sy(t))}" stroke="black"/>\n`;
    out += text(x0 - 7, sy(t) + 3, fmt(t), 'text-anchor="end"');
  }
  out += text(sx((xe.min + xe.max) / 2), y0 + 32, xLabel, 'text-anchor="middle"');
  out += text(12, sy((ye.min + ye.max) / 2), yLabel, 'text-anchor="middle" transform="rotate(-90 12 ' + fmt(sy((ye.min + ye.max) / 2)) + ')"');
  return out;
}
