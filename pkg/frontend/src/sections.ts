/**
 * Section plots: density values along y=x, y=1/2, and y=1/4, one colored
 * curve per (input grid, section) pair, overlaid on shared axes.
 */

import { DensityGrid, gridSection } from "./csv.js";
import { SERIES_COLORS, rgbCss } from "./color.js";
import { Raster } from "./png.js";
import { SvgDoc } from "./svg.js";

export const SECTION_SPECS: Array<{ name: string; kind: "diagonal" | number }> = [
  { name: "y=x", kind: "diagonal" },
  { name: "y=1/2", kind: 0.5 },
  { name: "y=1/4", kind: 0.25 },
];

export interface SectionSeries {
  label: string;
  color: [number, number, number];
  xs: number[];
  ys: number[];
}

export function buildSections(grids: DensityGrid[], labels: string[]): SectionSeries[] {
  const series: SectionSeries[] = [];
  grids.forEach((grid, gi) => {
    SECTION_SPECS.forEach((spec, si) => {
      const vals = gridSection(grid, spec.kind);
      const R = grid.resolution;
      series.push({
        label: `${labels[gi] ?? `grid${gi + 1}`} ${spec.name}`,
        color: SERIES_COLORS[(gi * SECTION_SPECS.length + si) % SERIES_COLORS.length],
        xs: vals.map((_, i) => (i + 0.5) / R),
        ys: vals,
      });
    });
  });
  return series;
}

const W = 640;
const H = 420;
const ML = 50;
const MB = 36;
const MT = 14;
const MR = 14;

function scales(series: SectionSeries[]) {
  let hi = 0;
  for (const s of series) for (const v of s.ys) hi = Math.max(hi, v);
  if (hi <= 0) hi = 1;
  const px = (x: number) => ML + x * (W - ML - MR);
  const py = (v: number) => MT + (1 - v / hi) * (H - MT - MB);
  return { hi, px, py };
}

export function sectionsSvg(series: SectionSeries[]): string {
  const { hi, px, py } = scales(series);
  const doc = new SvgDoc(W, H + 16 * Math.ceil(series.length / 2));
  doc.frame(ML, MT, W - ML - MR, H - MT - MB);
  for (const frac of [0, 0.25, 0.5, 0.75, 1]) {
    doc.text(px(frac), H - MB + 16, frac.toFixed(2), 10, "middle");
    doc.text(ML - 6, py(hi * frac) + 4, (hi * frac).toFixed(2), 10, "end");
  }
  doc.text((ML + W - MR) / 2, H - 6, "x", 12, "middle");
  series.forEach((s, k) => {
    doc.polyline(
      s.xs.map((x, i) => [px(x), py(s.ys[i])] as [number, number]),
      rgbCss(s.color),
    );
    const col = k % 2;
    const row = Math.floor(k / 2);
    const lx = ML + 10 + col * 300;
    const ly = H + 12 + row * 16;
    doc.polyline(
      [
        [lx, ly - 4],
        [lx + 22, ly - 4],
      ],
      rgbCss(s.color),
      2,
    );
    doc.text(lx + 28, ly, s.label, 11);
  });
  return doc.render();
}

export function sectionsPng(series: SectionSeries[]): Buffer {
  const { px, py } = scales(series);
  const img = new Raster(W, H);
  img.line(ML, MT, ML, H - MB, [0, 0, 0]);
  img.line(ML, H - MB, W - MR, H - MB, [0, 0, 0]);
  for (const s of series) {
    for (let i = 1; i < s.xs.length; i++) {
      img.line(px(s.xs[i - 1]), py(s.ys[i - 1]), px(s.xs[i]), py(s.ys[i]), s.color);
    }
  }
  return img.encode();
}
