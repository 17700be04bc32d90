import assert from "node:assert/strict";
import { test } from "node:test";
import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import { readDensityGrid, readHistogram } from "../src/csv.js";
import { heatmapPng, heatmapSvg } from "../src/heatmap.js";
import { buildSections, sectionsPng, sectionsSvg } from "../src/sections.js";
import { durationMarginal, overlayPng, overlaySvg } from "../src/overlay.js";
import { Raster, crc32 } from "../src/png.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const FIX = join(HERE, "..", "..", "test", "fixtures");
const CLI = join(HERE, "..", "src", "cli.js");

const PNG_MAGIC = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

function checkPng(buf: Buffer): { width: number; height: number } {
  assert.deepEqual(buf.subarray(0, 8), PNG_MAGIC);
  let off = 8;
  let dims = { width: 0, height: 0 };
  const seen: string[] = [];
  while (off < buf.length) {
    const len = buf.readUInt32BE(off);
    const type = buf.subarray(off + 4, off + 8).toString("ascii");
    const body = buf.subarray(off + 4, off + 8 + len);
    const crc = buf.readUInt32BE(off + 8 + len);
    assert.equal(crc, crc32(body), `crc of ${type}`);
    seen.push(type);
    if (type === "IHDR") {
      dims = { width: buf.readUInt32BE(off + 8), height: buf.readUInt32BE(off + 12) };
    }
    off += 12 + len;
  }
  assert.deepEqual(seen, ["IHDR", "IDAT", "IEND"]);
  return dims;
}

test("raster encodes a structurally valid png", () => {
  const img = new Raster(10, 7);
  img.fillRect(2, 2, 3, 3, [10, 200, 30]);
  img.line(0, 0, 9, 6, [0, 0, 0]);
  const { width, height } = checkPng(img.encode());
  assert.equal(width, 10);
  assert.equal(height, 7);
});

test("heatmap png and svg are deterministic", () => {
  const grid = readDensityGrid(join(FIX, "density4.csv"));
  const a = heatmapPng([grid]);
  const b = heatmapPng([grid]);
  assert.deepEqual(a, b);
  assert.equal(heatmapSvg([grid]), heatmapSvg([grid]));
});

test("heatmap svg draws one rect per cell and tiles panels", () => {
  const grid = readDensityGrid(join(FIX, "density4.csv"));
  const svg = heatmapSvg([grid, grid], { labels: ["a", "b"] });
  const rects = svg.match(/<rect /g) ?? [];
  // background + 2 panels x 16 cells + 2 frames
  assert.equal(rects.length, 1 + 2 * 16 + 2);
  assert.ok(svg.includes(">a</text>"));
});

test("section curves reproduce stored values exactly (pure view)", () => {
  const grid = readDensityGrid(join(FIX, "density4.csv"));
  const series = buildSections([grid], ["pb"]);
  assert.equal(series.length, 3);
  assert.deepEqual(series[0].ys, [1.0, 2.25, 3.5, 4.75]);
  const svg = sectionsSvg(series);
  assert.equal((svg.match(/<polyline /g) ?? []).length, 3 + series.length); // curves + legend swatches
  const png = sectionsPng(series);
  checkPng(png);
});

test("overlay aggregates the duration marginal and draws bars + step", () => {
  const bins = readHistogram(join(FIX, "hist.csv"));
  const marg = durationMarginal(bins);
  assert.equal(marg.length, 2);
  assert.equal(marg[0].count, 200);
  assert.ok(Math.abs(marg[0].expected - 201.3) < 1e-9);
  const svg = overlaySvg(bins);
  assert.ok(svg.includes("analytic expectation"));
  checkPng(overlayPng(bins));
});

test("cli renders all three kinds end to end", () => {
  const dir = mkdtempSync(join(tmpdir(), "plots-"));
  execFileSync("node", [CLI, "heatmap", "--in", join(FIX, "density4.csv"), "--out", join(dir, "h.png")]);
  execFileSync("node", [
    CLI, "sections",
    "--in", join(FIX, "density4.csv"),
    "--in", join(FIX, "density4.csv"),
    "--out", join(dir, "s.svg"),
  ]);
  execFileSync("node", [CLI, "overlay", "--in", join(FIX, "hist.csv"), "--out", join(dir, "o.svg")]);
  checkPng(readFileSync(join(dir, "h.png")));
  assert.ok(readFileSync(join(dir, "s.svg"), "utf8").startsWith("<svg"));
  assert.ok(readFileSync(join(dir, "o.svg"), "utf8").includes("polyline"));
});

test("cli fails with exit 2 on malformed csv, naming the row", () => {
  const dir = mkdtempSync(join(tmpdir(), "plots-"));
  assert.throws(
    () => execFileSync("node", [CLI, "heatmap", "--in", join(FIX, "bad_density.csv"), "--out", join(dir, "x.png")]),
    (err: any) => err.status === 2 && /bad_density\.csv:3/.test(String(err.stderr)),
  );
});
