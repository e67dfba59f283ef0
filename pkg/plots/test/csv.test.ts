import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { column, readCsv } from "../src/csv.js";

function tmpCsv(content: string): string {
  const dir = mkdtempSync(join(tmpdir(), "plots-csv-"));
  const path = join(dir, "t.csv");
  writeFileSync(path, content);
  return path;
}

describe("readCsv", () => {
  it("parses header and rows, skipping blank lines", () => {
    const t = readCsv(tmpCsv("a,b\n1,2\n\n3,4\n"));
    expect(t.header).toEqual(["a", "b"]);
    expect(t.rows).toEqual([["1", "2"], ["3", "4"]]);
  });

  it("rejects an empty file", () => {
    expect(() => readCsv(tmpCsv(""))).toThrow(/empty CSV/);
  });
});

describe("column", () => {
  it("extracts numbers by header name", () => {
    const t = readCsv(tmpCsv("node_index,value\n0,1.5\n1,-2\n"));
    expect(column(t, "value")).toEqual([1.5, -2]);
  });

  it("names the missing column and the file", () => {
    const path = tmpCsv("node_index,value\n0,1\n");
    const t = readCsv(path);
    expect(() => column(t, "variance")).toThrow(/missing column variance/);
    expect(() => column(t, "variance")).toThrow(new RegExp(path.replace(/[.\\/]/g, "\\$&")));
  });
});
