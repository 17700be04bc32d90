/**
 * Parsers for the CSV formats emitted by the permuton toolkit.
 *
 * Density grid: header "x,y,value", one cell per line, row-major by y then x.
 * Permuton grid: header "row,col,mass", 0-indexed cells.
 * Exit histogram: header "t_lo,t_hi,r_lo,r_hi,count,expected".
 *
 * These renderers are pure views over the files: nothing is recomputed, and
 * malformed lines fail with the offending row number.
 */

import { readFileSync } from "node:fs";

export class ParseError extends Error {
  constructor(file: string, line: number, message: string) {
    super(`${file}:${line}: ${message}`);
    this.name = "ParseError";
  }
}

export interface DensityGrid {
  resolution: number;
  /** values[i][j] = density at x-cell i, y-cell j (cell midpoints). */
  values: number[][];
}

export interface PermutonGrid {
  resolution: number;
  /** cells[i][j] = mass of x-cell i, y-cell j. */
  cells: number[][];
}

export interface HistogramBin {
  tLo: number;
  tHi: number;
  rLo: number;
  rHi: number;
  count: number;
  expected: number;
}

function splitLines(text: string): string[] {
  return text.split(/\r?\n/);
}

function numField(file: string, lineNo: number, raw: string, what: string): number {
  const v = Number(raw);
  if (raw.trim() === "" || Number.isNaN(v)) {
    throw new ParseError(file, lineNo, `bad ${what} ${JSON.stringify(raw)}`);
  }
  return v;
}

export function readDensityGrid(file: string): DensityGrid {
  const lines = splitLines(readFileSync(file, "utf8"));
  if (lines[0]?.trim() !== "x,y,value") {
    throw new ParseError(file, 1, `expected header "x,y,value", got ${JSON.stringify(lines[0])}`);
  }
  const rows: Array<[number, number, number]> = [];
  for (let k = 1; k < lines.length; k++) {
    const line = lines[k].trim();
    if (!line) continue;
    const parts = line.split(",");
    if (parts.length !== 3) {
      throw new ParseError(file, k + 1, `expected 3 fields, got ${parts.length}`);
    }
    rows.push([
      numField(file, k + 1, parts[0], "x"),
      numField(file, k + 1, parts[1], "y"),
      numField(file, k + 1, parts[2], "value"),
    ]);
  }
  const resolution = Math.round(Math.sqrt(rows.length));
  if (resolution * resolution !== rows.length || resolution === 0) {
    throw new ParseError(file, lines.length, `${rows.length} cells is not a square grid`);
  }
  const values: number[][] = Array.from({ length: resolution }, () =>
    new Array<number>(resolution).fill(NaN),
  );
  for (const [x, y, v] of rows) {
    const i = Math.min(resolution - 1, Math.max(0, Math.floor(x * resolution)));
    const j = Math.min(resolution - 1, Math.max(0, Math.floor(y * resolution)));
    values[i][j] = v;
  }
  return { resolution, values };
}

export function readPermutonGrid(file: string): PermutonGrid {
  const lines = splitLines(readFileSync(file, "utf8"));
  if (lines[0]?.trim() !== "row,col,mass") {
    throw new ParseError(file, 1, `expected header "row,col,mass", got ${JSON.stringify(lines[0])}`);
  }
  const rows: Array<[number, number, number]> = [];
  let maxIdx = 0;
  for (let k = 1; k < lines.length; k++) {
    const line = lines[k].trim();
    if (!line) continue;
    const parts = line.split(",");
    if (parts.length !== 3) {
      throw new ParseError(file, k + 1, `expected 3 fields, got ${parts.length}`);
    }
    const r = numField(file, k + 1, parts[0], "row");
    const c = numField(file, k + 1, parts[1], "col");
    if (!Number.isInteger(r) || !Number.isInteger(c) || r < 0 || c < 0) {
      throw new ParseError(file, k + 1, "row/col must be nonnegative integers");
    }
    maxIdx = Math.max(maxIdx, r, c);
    rows.push([r, c, numField(file, k + 1, parts[2], "mass")]);
  }
  if (rows.length === 0) {
    throw new ParseError(file, 2, "empty grid");
  }
  const resolution = maxIdx + 1;
  const cells: number[][] = Array.from({ length: resolution }, () =>
    new Array<number>(resolution).fill(0),
  );
  for (const [r, c, m] of rows) cells[r][c] = m;
  return { resolution, cells };
}

export function readHistogram(file: string): HistogramBin[] {
  const lines = splitLines(readFileSync(file, "utf8"));
  if (lines[0]?.trim() !== "t_lo,t_hi,r_lo,r_hi,count,expected") {
    throw new ParseError(
      file,
      1,
      `expected header "t_lo,t_hi,r_lo,r_hi,count,expected", got ${JSON.stringify(lines[0])}`,
    );
  }
  const bins: HistogramBin[] = [];
  for (let k = 1; k < lines.length; k++) {
    const line = lines[k].trim();
    if (!line) continue;
    const parts = line.split(",");
    if (parts.length !== 6) {
      throw new ParseError(file, k + 1, `expected 6 fields, got ${parts.length}`);
    }
    bins.push({
      tLo: numField(file, k + 1, parts[0], "t_lo"),
      tHi: numField(file, k + 1, parts[1], "t_hi"),
      rLo: numField(file, k + 1, parts[2], "r_lo"),
      rHi: numField(file, k + 1, parts[3], "r_hi"),
      count: numField(file, k + 1, parts[4], "count"),
      expected: numField(file, k + 1, parts[5], "expected"),
    });
  }
  if (bins.length === 0) throw new ParseError(file, 2, "empty histogram");
  return bins;
}

/** Section of a density grid along y = x, or along a fixed y level. */
export function gridSection(grid: DensityGrid, kind: "diagonal" | number): number[] {
  const R = grid.resolution;
  if (kind === "diagonal") {
    return Array.from({ length: R }, (_, i) => grid.values[i][i]);
  }
  const j = Math.min(R - 1, Math.max(0, Math.floor(kind * R)));
  return Array.from({ length: R }, (_, i) => grid.values[i][j]);
}
