import assert from "node:assert/strict";
import { test } from "node:test";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import {
  ParseError,
  gridSection,
  readDensityGrid,
  readHistogram,
  readPermutonGrid,
} from "../src/csv.js";

const FIX = join(dirname(fileURLToPath(import.meta.url)), "..", "..", "test", "fixtures");

test("density grid parses with correct orientation", () => {
  const grid = readDensityGrid(join(FIX, "density4.csv"));
  assert.equal(grid.resolution, 4);
  // fixture value at cell (i, j) is 1 + i + 0.25 j
  assert.equal(grid.values[0][0], 1.0);
  assert.equal(grid.values[3][0], 4.0);
  assert.equal(grid.values[0][3], 1.75);
});

test("malformed density value reports file and row", () => {
  assert.throws(
    () => readDensityGrid(join(FIX, "bad_density.csv")),
    (err: Error) => err instanceof ParseError && /bad_density\.csv:3/.test(err.message),
  );
});

test("density grid rejects wrong header", () => {
  assert.throws(
    () => readPermutonGrid(join(FIX, "density4.csv")),
    (err: Error) => err instanceof ParseError && /row,col,mass/.test(err.message),
  );
});

test("permuton grid parses masses", () => {
  const grid = readPermutonGrid(join(FIX, "permuton3.csv"));
  assert.equal(grid.resolution, 3);
  assert.equal(grid.cells[2][1], 0.4);
  const total = grid.cells.flat().reduce((a, b) => a + b, 0);
  assert.ok(Math.abs(total - 1.0) < 1e-12);
});

test("histogram parses bins with expected column", () => {
  const bins = readHistogram(join(FIX, "hist.csv"));
  assert.equal(bins.length, 4);
  assert.equal(bins[0].count, 120);
  assert.equal(bins[0].expected, 118.2);
  assert.equal(bins[3].rHi, 2.0);
});

test("sections extract the stored values without recomputation", () => {
  const grid = readDensityGrid(join(FIX, "density4.csv"));
  const diag = gridSection(grid, "diagonal");
  assert.deepEqual(diag, [1.0, 2.25, 3.5, 4.75]);
  const mid = gridSection(grid, 0.5);
  // y = 1/2 falls in y-cell 2
  assert.deepEqual(mid, [1.5, 2.5, 3.5, 4.5]);
});
