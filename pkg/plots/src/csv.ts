import { readFileSync } from "node:fs";

export interface Table {
  path: string;
  header: string[];
  rows: string[][];
}

export function readCsv(path: string): Table {
  const text = readFileSync(path, "utf8");
  const lines = text.split("\n").filter(line => line.trim().length > 0);
  if (lines.length === 0) {
    throw new Error(`${path}: empty CSV`);
  }
  const header = (lines[0] as string).split(",").map(h => h.trim());
  const rows = lines.slice(1).map(line => line.split(","));
  return { path, header, rows };
}

export function column(table: Table, name: string): number[] {
  const i = table.header.indexOf(name);
  if (i < 0) {
    throw new Error(`${table.path}: missing column ${name}`);
  }
  return table.rows.map(row => Number(row[i]));
}

export function readJson(path: string): Record<string, unknown> {
  return JSON.parse(readFileSync(path, "utf8")) as Record<string, unknown>;
}
