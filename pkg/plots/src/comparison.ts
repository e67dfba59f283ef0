// Scatter of the mesh-based posterior mean against the closed-form
// reference mean from comparison.csv, with the identity line and the
// summary's worst absolute difference called out.
// Usage: node dist/comparison.js <comparison.csv> <out.svg>

import { writeFileSync } from "node:fs";
import { column, readCsv } from "./csv.js";
import { extent, fmt, scale, svgDocument, text, axes } from "./svg.js";

const WIDTH = 460;
const HEIGHT = 440;
const M = { left: 64, right: 24, top: 30, bottom: 52 };

export function render(comparisonPath: string): string {
  const table = readCsv(comparisonPath);
  const fe = column(table, "fe_mean");
  const harmonic = column(table, "harmonic_mean");
  const diff = column(table, "abs_diff");

  const all = fe.concat(harmonic);
  const e = extent(all);
  const pad = (e.max - e.min) * 0.05 || 0.5;
  const xe = { min: e.min - pad, max: e.max + pad };
  const sx = scale(xe, M.left, WIDTH - M.right);
  const sy = scale(xe, HEIGHT - M.bottom, M.top);

  let body = `<line class="identity" x1="${fmt(sx(xe.min))}" y1="${fmt(sy(xe.min))}" x2="${fmt(sx(xe.max))}" y2="${fmt(sy(xe.max))}" stroke="#999" stroke-dasharray="4,3"/>\n`;
  fe.forEach((v, i) => {
    body += `<circle class="pt" cx="${fmt(sx(harmonic[i] as number))}" cy="${fmt(sy(v))}" r="2" fill="#3b528b" fill-opacity="0.6"/>\n`;
  });
  body += axes(xe, xe, sx, sy, M.left, HEIGHT - M.bottom, "reference mean", "mesh mean");
  body += text(M.left, 18, `${fe.length} nodes, max |diff| = ${fmt(Math.max(...diff))}`);
  return svgDocument(WIDTH, HEIGHT, body);
}

export function main(argv: string[]): void {
  if (argv.length !== 2) {
    console.error("usage: comparison <comparison.csv> <out.svg>");
    process.exit(2);
  }
  const [comparisonPath, outPath] = argv as [string, string];
  const svg = render(comparisonPath);
  writeFileSync(outPath, svg);
  console.log(`wrote ${outPath} (${svg.length} bytes)`);
}

if (process.argv[1] && process.argv[1].endsWith("comparison.js")) {
  main(process.argv.slice(2));
}
