// Presentation geometry: project the node coordinates carried in
// prediction.csv onto the 2-D chart the figures are drawn in. Cylinders
// map to (angle, z), spheres to (longitude, latitude). Nothing here
// touches the statistical columns.

export interface ChartPoint {
  angle: number; // degrees in [0, 360)
  axial: number; // z for cylinders, latitude for spheres
}

const DEG = 180 / Math.PI;

export function toChart(xs: number[], ys: number[], zs: number[]): ChartPoint[] {
  const radial = xs.map((x, i) => Math.hypot(x, ys[i] as number));
  const r0 = radial[0] as number;
  const cylinder =
    radial.every(r => Math.abs(r - r0) <= 1e-6 * Math.max(1, r0)) &&
    Math.max(...zs) - Math.min(...zs) > 1e-9;
  return xs.map((x, i) => {
    let angle = Math.atan2(ys[i] as number, x) * DEG;
    if (angle < 0) angle += 360;
    if (cylinder) {
      return { angle, axial: zs[i] as number };
    }
    const norm = Math.hypot(x, ys[i] as number, zs[i] as number);
    return { angle, axial: Math.asin((zs[i] as number) / norm) * DEG };
  });
}

// Distinct sorted values with an exact-match snap; grid meshes repeat
// coordinates bitwise so no tolerance clustering is needed.
export function distinct(values: number[]): number[] {
  return [...new Set(values)].sort((a, b) => a - b);
}

export function medianGap(sorted: number[]): number {
  if (sorted.length < 2) return 1;
  const gaps: number[] = [];
  for (let i = 1; i < sorted.length; i++) {
    gaps.push((sorted[i] as number) - (sorted[i - 1] as number));
  }
  gaps.sort((a, b) => a - b);
  return gaps[Math.floor(gaps.length / 2)] as number;
}

export function wrappedDistance(a: number, b: number): number {
  const d = Math.abs(((a - b) % 360) + 360) % 360;
  return Math.min(d, 360 - d);
}
