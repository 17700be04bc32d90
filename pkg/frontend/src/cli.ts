#!/usr/bin/env node
/**
 * permuton-plots: render heatmaps, section plots, and MC overlays from the
 * CSV files the permuton toolkit emits. Output format follows the --out
 * extension (.png or .svg). Pure file-to-file views; deterministic.
 *
 *   permuton-plots heatmap  --in ps01.csv --in ps04.csv --in ps05.csv --in pb.csv --out fig1.png
 *   permuton-plots sections --in pb.csv --in ps05.csv --out fig2.svg
 *   permuton-plots overlay  --in hist.csv --out mc.svg
 */

import { writeFileSync } from "node:fs";
import { basename } from "node:path";

import { ParseError, readDensityGrid, readHistogram } from "./csv.js";
import { heatmapPng, heatmapSvg } from "./heatmap.js";
import { buildSections, sectionsPng, sectionsSvg } from "./sections.js";
import { overlayPng, overlaySvg } from "./overlay.js";

interface Args {
  command: string;
  inputs: string[];
  out: string;
  labels: string[];
  sharedScale: boolean;
}

function usage(): never {
  process.stderr.write(
    "usage: permuton-plots <heatmap|sections|overlay> --in FILE [--in FILE ...] " +
      "--out FILE[.png|.svg] [--label TEXT ...] [--shared-scale]\n",
  );
  process.exit(2);
}

function parseArgs(argv: string[]): Args {
  if (argv.length === 0) usage();
  const [command, ...rest] = argv;
  const inputs: string[] = [];
  const labels: string[] = [];
  let out = "";
  let sharedScale = false;
  for (let i = 0; i < rest.length; i++) {
    const a = rest[i];
    if (a === "--in") inputs.push(rest[++i] ?? usage());
    else if (a === "--out") out = rest[++i] ?? usage();
    else if (a === "--label") labels.push(rest[++i] ?? usage());
    else if (a === "--shared-scale") sharedScale = true;
    else usage();
  }
  if (!out || inputs.length === 0) usage();
  return { command, inputs, out, labels, sharedScale };
}

function run(args: Args): void {
  const wantPng = args.out.toLowerCase().endsWith(".png");
  const wantSvg = args.out.toLowerCase().endsWith(".svg");
  if (!wantPng && !wantSvg) {
    process.stderr.write("error: --out must end in .png or .svg\n");
    process.exit(2);
  }
  const labels =
    args.labels.length > 0 ? args.labels : args.inputs.map((p) => basename(p).replace(/\.csv$/, ""));
  if (args.command === "heatmap") {
    const grids = args.inputs.map(readDensityGrid);
    if (wantPng) writeFileSync(args.out, heatmapPng(grids, { sharedScale: args.sharedScale }));
    else writeFileSync(args.out, heatmapSvg(grids, { labels, sharedScale: args.sharedScale }));
  } else if (args.command === "sections") {
    const grids = args.inputs.map(readDensityGrid);
    const series = buildSections(grids, labels);
    writeFileSync(args.out, wantPng ? sectionsPng(series) : sectionsSvg(series));
  } else if (args.command === "overlay") {
    if (args.inputs.length !== 1) {
      process.stderr.write("error: overlay takes exactly one --in histogram\n");
      process.exit(2);
    }
    const bins = readHistogram(args.inputs[0]);
    writeFileSync(args.out, wantPng ? overlayPng(bins) : overlaySvg(bins));
  } else {
    usage();
  }
  process.stdout.write(`wrote ${args.out}\n`);
}

try {
  run(parseArgs(process.argv.slice(2)));
} catch (err) {
  if (err instanceof ParseError) {
    process.stderr.write(`error: ${err.message}\n`);
    process.exit(2);
  }
  throw err;
}
