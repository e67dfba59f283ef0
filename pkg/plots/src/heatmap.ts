// Chart heatmap of a prediction: one colored cell per mesh node in the
// (angle, axial) chart, observation nodes marked with black dots.
// Usage: node dist/heatmap.js <prediction.csv> <summary.csv> <out.svg>

import { writeFileSync } from "node:fs";
import { column, readCsv } from "./csv.js";
import { distinct, medianGap, toChart } from "./chart.js";
import { colorRamp, extent, fmt, scale, svgDocument, text, axes } from "./svg.js";

const WIDTH = 720;
const HEIGHT = 420;
const M = { left: 60, right: 90, top: 28, bottom: 48 };

export function render(predictionPath: string, summaryPath: string): string {
  const pred = readCsv(predictionPath);
  const mean = column(pred, "mean");
  const pts = toChart(column(pred, "x"), column(pred, "y"), column(pred, "z"));

  const summary = readCsv(summaryPath);
  const variance = column(summary, "variance");
  const nodeOf = column(summary, "node_index");
  const maxVar = Math.max(...variance);
  const pinned = new Set<number>();
  variance.forEach((v, i) => {
    if (v <= 1e-12 * maxVar) pinned.add(nodeOf[i] as number);
  });

  const angles = pts.map(p => p.angle);
  const axials = pts.map(p => p.axial);
  const cellW = medianGap(distinct(angles));
  const cellH = medianGap(distinct(axials));
  const xe = { min: Math.min(...angles) - cellW / 2, max: Math.max(...angles) + cellW / 2 };
  const ye = { min: Math.min(...axials) - cellH / 2, max: Math.max(...axials) + cellH / 2 };
  const sx = scale(xe, M.left, WIDTH - M.right);
  const sy = scale(ye, HEIGHT - M.bottom, M.top); // svg y grows downward
  const ce = extent(mean);

  let body = "";
  const pxW = Math.abs(sx(xe.min + cellW) - sx(xe.min));
  const pxH = Math.abs(sy(ye.min + cellH) - sy(ye.min));
  pts.forEach((p, i) => {
    const t = ce.max === ce.min ? 0.5 : ((mean[i] as number) - ce.min) / (ce.max - ce.min);
    const x = sx(p.angle) - pxW / 2;
    const y = sy(p.axial) - pxH / 2;
    body += `<rect class="cell" x="${fmt(x)}" y="${fmt(y)}" width="${fmt(pxW)}" height="${fmt(pxH)}" fill="${colorRamp(t)}"/>\n`;
  });
  pts.forEach((p, i) => {
    if (pinned.has(i)) {
      body += `<circle class="obs" cx="${fmt(sx(p.angle))}" cy="${fmt(sy(p.axial))}" r="3.5" fill="black"/>\n`;
    }
  });
  body += axes(xe, ye, sx, sy, M.left, HEIGHT - M.bottom, "angle (deg)", "axial");

  // color legend: a stack of thin rects, min/max labels
  const lx = WIDTH - M.right + 24;
  const steps = 48;
  for (let i = 0; i < steps; i++) {
    const y0 = sy(ye.min) - ((i + 1) * (sy(ye.min) - sy(ye.max))) / steps;
    const h = (sy(ye.min) - sy(ye.max)) / steps;
    body += `<rect x="${fmt(lx)}" y="${fmt(y0)}" width="14" height="${fmt(h + 0.5)}" fill="${colorRamp(i / (steps - 1))}"/>\n`;
  }
  body += text(lx + 18, sy(ye.min) + 3, fmt(ce.min));
  body += text(lx + 18, sy(ye.max) + 3, fmt(ce.max));
  body += text(M.left, 16, `prediction mean, ${pts.length} nodes, ${pinned.size} observations`);
  return svgDocument(WIDTH, HEIGHT, body);
}

export function main(argv: string[]): void {
  if (argv.length !== 3) {
    console.error("usage: heatmap <prediction.csv> <summary.csv> <out.svg>");
    process.exit(2);
  }
  const [predictionPath, summaryPath, outPath] = argv as [string, string, string];
  const svg = render(predictionPath, summaryPath);
  writeFileSync(outPath, svg);
  console.log(`wrote ${outPath} (${svg.length} bytes)`);
}

if (process.argv[1] && process.argv[1].endsWith("heatmap.js")) {
  main(process.argv.slice(2));
}
