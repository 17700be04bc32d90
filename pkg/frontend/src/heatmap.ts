/**
 * Heatmap rendering of density / permuton grids, one panel per input file,
 * tiled horizontally (the four-panel density figure layout).
 */

import { DensityGrid } from "./csv.js";
import { viridis, rgbCss } from "./color.js";
import { Raster } from "./png.js";
import { SvgDoc } from "./svg.js";

export interface HeatmapOptions {
  cellPixels?: number;
  gap?: number;
  labels?: string[];
  /** shared color scale across panels; default scales each panel alone */
  sharedScale?: boolean;
}

function panelMax(grid: DensityGrid): number {
  let hi = 0;
  for (const row of grid.values) for (const v of row) hi = Math.max(hi, v);
  return hi > 0 ? hi : 1;
}

/** Pixel color of cell (i, j): y axis points up, so j=R-1 is the top row. */
function cellColor(grid: DensityGrid, i: number, j: number, hi: number): [number, number, number] {
  return viridis(grid.values[i][j] / hi);
}

export function heatmapPng(grids: DensityGrid[], opts: HeatmapOptions = {}): Buffer {
  const gap = opts.gap ?? 6;
  const shared = opts.sharedScale ?? false;
  const his = grids.map(panelMax);
  const hiAll = Math.max(...his);
  const sizes = grids.map((g) => {
    const cp = opts.cellPixels ?? Math.max(2, Math.ceil(320 / g.resolution));
    return cp * g.resolution;
  });
  const width = sizes.reduce((a, b) => a + b, 0) + gap * (grids.length - 1);
  const height = Math.max(...sizes);
  const img = new Raster(width, height);
  let xOff = 0;
  grids.forEach((grid, gi) => {
    const R = grid.resolution;
    const cp = sizes[gi] / R;
    const hi = shared ? hiAll : his[gi];
    for (let i = 0; i < R; i++) {
      for (let j = 0; j < R; j++) {
        img.fillRect(xOff + i * cp, (R - 1 - j) * cp, cp, cp, cellColor(grid, i, j, hi));
      }
    }
    xOff += sizes[gi] + gap;
  });
  return img.encode();
}

export function heatmapSvg(grids: DensityGrid[], opts: HeatmapOptions = {}): string {
  const gap = opts.gap ?? 8;
  const shared = opts.sharedScale ?? false;
  const his = grids.map(panelMax);
  const hiAll = Math.max(...his);
  const panel = 320;
  const labelBand = opts.labels ? 18 : 0;
  const width = panel * grids.length + gap * (grids.length - 1);
  const doc = new SvgDoc(width, panel + labelBand);
  grids.forEach((grid, gi) => {
    const R = grid.resolution;
    const cp = panel / R;
    const hi = shared ? hiAll : his[gi];
    const xOff = gi * (panel + gap);
    for (let i = 0; i < R; i++) {
      for (let j = 0; j < R; j++) {
        doc.rect(xOff + i * cp, (R - 1 - j) * cp, cp + 0.5, cp + 0.5, rgbCss(cellColor(grid, i, j, hi)));
      }
    }
    doc.frame(xOff, 0, panel, panel);
    if (opts.labels && opts.labels[gi]) {
      doc.text(xOff + panel / 2, panel + 14, opts.labels[gi], 12, "middle");
    }
  });
  return doc.render();
}
