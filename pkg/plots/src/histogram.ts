// Histogram of a per-node column (errors.csv or scores.csv) with the
// matching aggregate from score_summary.json as an annotation.
// Usage: node dist/histogram.js <values.csv> <score_summary.json> <out.svg>

import { writeFileSync } from "node:fs";
import { column, readCsv, readJson } from "./csv.js";
import { extent, fmt, scale, svgDocument, text, axes } from "./svg.js";

const WIDTH = 560;
const HEIGHT = 360;
const M = { left: 60, right: 24, top: 30, bottom: 48 };

export function render(valuesPath: string, summaryPath: string): string {
  const table = readCsv(valuesPath);
  const name = table.header[1];
  if (table.header.length < 2 || name === undefined) {
    throw new Error(`${valuesPath}: missing column after node_index`);
  }
  const values = column(table, name);
  const summary = readJson(summaryPath);

  const ve = extent(values);
  let bins: number[];
  let edges: number[];
  if (ve.max === ve.min) {
    bins = [values.length]; // constant column: a single bar
    edges = [ve.min - 0.5, ve.min + 0.5];
  } else {
    const k = Math.min(24, Math.max(6, Math.ceil(Math.sqrt(values.length))));
    bins = new Array(k).fill(0);
    edges = [];
    for (let i = 0; i <= k; i++) edges.push(ve.min + ((ve.max - ve.min) * i) / k);
    for (const v of values) {
      let b = Math.floor(((v - ve.min) / (ve.max - ve.min)) * k);
      if (b === k) b = k - 1;
      bins[b] = (bins[b] as number) + 1;
    }
  }

  const xe = { min: edges[0] as number, max: edges[edges.length - 1] as number };
  const ye = { min: 0, max: Math.max(...bins) };
  const sx = scale(xe, M.left, WIDTH - M.right);
  const sy = scale(ye, HEIGHT - M.bottom, M.top);

  let body = "";
  bins.forEach((count, b) => {
    const x0 = sx(edges[b] as number);
    const x1 = sx(edges[b + 1] as number);
    body += `<rect class="bar" x="${fmt(x0)}" y="${fmt(sy(count))}" width="${fmt(x1 - x0)}" height="${fmt(sy(0) - sy(count))}" fill="#3b528b" stroke="white" stroke-width="0.5"/>\n`;
  });
  body += axes(xe, ye, sx, sy, M.left, HEIGHT - M.bottom, name, "count");

  const note =
    name === "error"
      ? `RMSE = ${fmt(Number(summary["rmse"]))}`
      : `mean ${name} = ${fmt(Number(summary[`mean_${name}`]))}`;
  body += text(WIDTH - M.right, 18, note, 'text-anchor="end" font-weight="bold"');
  body += text(M.left, 18, `${values.length} nodes`);
  return svgDocument(WIDTH, HEIGHT, body);
}

export function main(argv: string[]): void {
  if (argv.length !== 3) {
    console.error("usage: histogram <values.csv> <score_summary.json> <out.svg>");
    process.exit(2);
  }
  const [valuesPath, summaryPath, outPath] = argv as [string, string, string];
  const svg = render(valuesPath, summaryPath);
  writeFileSync(outPath, svg);
  console.log(`wrote ${outPath} (${svg.length} bytes)`);
}

if (process.argv[1] && process.argv[1].endsWith("histogram.js")) {
  main(process.argv.slice(2));
}
