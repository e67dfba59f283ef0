// Predictive ribbon along one mesh line: empirical 95% band and mean from
// summary.csv, optional truth overlay, observation markers at the pinned
// nodes. The line is picked by a slice selector like "theta=270" or
// "lon=170": the distinct chart angle nearest the target.
// Usage: node dist/ribbon.js <summary.csv> <prediction.csv> <truth.csv|-> <selector> <out.svg>

import { writeFileSync } from "node:fs";
import { column, readCsv } from "./csv.js";
import { distinct, toChart, wrappedDistance } from "./chart.js";
import { extent, fmt, scale, svgDocument, text, axes } from "./svg.js";

const WIDTH = 640;
const HEIGHT = 380;
const M = { left: 60, right: 24, top: 30, bottom: 48 };

export interface SliceNode {
  node: number;
  axial: number;
  mean: number;
  lo: number;
  hi: number;
  pinned: boolean;
  truth?: number;
}

export function parseSelector(selector: string): number {
  const m = /^(theta|lon)=(-?\d+(\.\d+)?)$/.exec(selector.trim());
  if (!m) {
    throw new Error(`bad slice selector ${selector}; expected theta=<deg> or lon=<deg>`);
  }
  return Number(m[2]);
}

export function sliceNodes(
  summaryPath: string,
  predictionPath: string,
  truthPath: string | null,
  selector: string
): { nodes: SliceNode[]; angle: number } {
  const target = parseSelector(selector);
  const pred = readCsv(predictionPath);
  const pts = toChart(column(pred, "x"), column(pred, "y"), column(pred, "z"));
  const predNode = column(pred, "node_index");

  const summary = readCsv(summaryPath);
  const sNode = column(summary, "node_index");
  const mean = column(summary, "mean");
  const variance = column(summary, "variance");
  const lo = column(summary, "q2.5");
  const hi = column(summary, "q97.5");
  const byNode = new Map<number, { mean: number; variance: number; lo: number; hi: number }>();
  sNode.forEach((n, i) => {
    byNode.set(n, {
      mean: mean[i] as number,
      variance: variance[i] as number,
      lo: lo[i] as number,
      hi: hi[i] as number,
    });
  });
  const maxVar = Math.max(...variance);

  const truth = new Map<number, number>();
  if (truthPath !== null) {
    const t = readCsv(truthPath);
    const tn = column(t, "node_index");
    const tv = column(t, "value");
    tn.forEach((n, i) => truth.set(n, tv[i] as number));
  }

  const angles = distinct(pts.map(p => p.angle));
  let angle = angles[0] as number;
  for (const a of angles) {
    if (wrappedDistance(a, target) < wrappedDistance(angle, target)) angle = a;
  }

  const nodes: SliceNode[] = [];
  pts.forEach((p, i) => {
    if (Math.abs(p.angle - angle) > 1e-9) return;
    const node = predNode[i] as number;
    const s = byNode.get(node);
    if (!s) return;
    nodes.push({
      node,
      axial: p.axial,
      mean: s.mean,
      lo: s.lo,
      hi: s.hi,
      pinned: s.variance <= 1e-12 * maxVar,
      ...(truth.has(node) ? { truth: truth.get(node) as number } : {}),
    });
  });
  if (nodes.length < 2) {
    throw new Error(`slice selector ${selector} matches only ${nodes.length} node(s)`);
  }
  nodes.sort((a, b) => a.axial - b.axial);
  return { nodes, angle };
}

export function render(
  summaryPath: string,
  predictionPath: string,
  truthPath: string | null,
  selector: string
): string {
  const { nodes, angle } = sliceNodes(summaryPath, predictionPath, truthPath, selector);

  const ys: number[] = [];
  for (const n of nodes) {
    ys.push(n.lo, n.hi, n.mean);
    if (n.truth !== undefined) ys.push(n.truth);
  }
  const xe = extent(nodes.map(n => n.axial));
  const ye = extent(ys);
  const sx = scale(xe, M.left, WIDTH - M.right);
  const sy = scale(ye, HEIGHT - M.bottom, M.top);

  const upper = nodes.map(n => `${fmt(sx(n.axial))},${fmt(sy(n.hi))}`);
  const lower = nodes.map(n => `${fmt(sx(n.axial))},${fmt(sy(n.lo))}`).reverse();
  let body = `<polygon class="band" points="${upper.concat(lower).join(" ")}" fill="#3b528b" fill-opacity="0.25" stroke="none"/>\n`;
  const meanPts = nodes.map(n => `${fmt(sx(n.axial))},${fmt(sy(n.mean))}`).join(" ");
  body += `<polyline class="mean" points="${meanPts}" fill="none" stroke="#3b528b" stroke-width="1.8"/>\n`;
  const withTruth = nodes.filter(n => n.truth !== undefined);
  if (withTruth.length > 0) {
    const truthPts = withTruth
      .map(n => `${fmt(sx(n.axial))},${fmt(sy(n.truth as number))}`)
      .join(" ");
    body += `<polyline class="truth" points="${truthPts}" fill="none" stroke="#d1495b" stroke-width="1.5" stroke-dasharray="5,3"/>\n`;
  }
  for (const n of nodes) {
    if (n.pinned) {
      body += `<circle class="obs" cx="${fmt(sx(n.axial))}" cy="${fmt(sy(n.mean))}" r="3.5" fill="black"/>\n`;
    }
  }
  body += axes(xe, ye, sx, sy, M.left, HEIGHT - M.bottom, "axial", "value");
  body += text(M.left, 18, `ribbon at angle ${fmt(angle)} deg, ${nodes.length} nodes (95% band)`);
  return svgDocument(WIDTH, HEIGHT, body);
}

export function main(argv: string[]): void {
  if (argv.length !== 5) {
    console.error(
      "usage: ribbon <summary.csv> <prediction.csv> <truth.csv|-> <selector> <out.svg>"
    );
    process.exit(2);
  }
  const [summaryPath, predictionPath, truthArg, selector, outPath] = argv as [
    string, string, string, string, string,
  ];
  const svg = render(summaryPath, predictionPath, truthArg === "-" ? null : truthArg, selector);
  writeFileSync(outPath, svg);
  console.log(`wrote ${outPath} (${svg.length} bytes)`);
}

if (process.argv[1] && process.argv[1].endsWith("ribbon.js")) {
  main(process.argv.slice(2));
}
