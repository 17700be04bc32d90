/**
 * Monte Carlo overlay: observed exit counts as bars against the analytic
 * expectation as a step curve, both straight from the histogram CSV
 * (the expected column is written by the simulator's comparison report;
 * nothing is recomputed here). Bins are aggregated over the radius axis to
 * give the duration marginal.
 */

import { HistogramBin } from "./csv.js";
import { SERIES_COLORS, rgbCss } from "./color.js";
import { Raster } from "./png.js";
import { SvgDoc } from "./svg.js";

export interface MarginalBin {
  lo: number;
  hi: number;
  count: number;
  expected: number;
}

export function durationMarginal(bins: HistogramBin[]): MarginalBin[] {
  const byT = new Map<string, MarginalBin>();
  for (const b of bins) {
    const key = `${b.tLo}:${b.tHi}`;
    const cur = byT.get(key) ?? { lo: b.tLo, hi: b.tHi, count: 0, expected: 0 };
    cur.count += b.count;
    cur.expected += Number.isNaN(b.expected) ? 0 : b.expected;
    byT.set(key, cur);
  }
  return [...byT.values()].sort((a, b) => a.lo - b.lo);
}

const W = 640;
const H = 420;
const ML = 56;
const MB = 40;
const MT = 14;
const MR = 14;

export function overlaySvg(bins: HistogramBin[]): string {
  const marg = durationMarginal(bins);
  const tMin = marg[0].lo;
  const tMax = marg[marg.length - 1].hi;
  const hi = Math.max(...marg.map((b) => Math.max(b.count, b.expected))) || 1;
  const px = (t: number) => ML + ((t - tMin) / (tMax - tMin)) * (W - ML - MR);
  const py = (v: number) => MT + (1 - v / hi) * (H - MT - MB);
  const doc = new SvgDoc(W, H + 20);
  doc.frame(ML, MT, W - ML - MR, H - MT - MB);
  const barColor = rgbCss(SERIES_COLORS[1]);
  for (const b of marg) {
    doc.rect(px(b.lo), py(b.count), px(b.hi) - px(b.lo), py(0) - py(b.count), barColor);
  }
  const stepPts: Array<[number, number]> = [];
  for (const b of marg) {
    stepPts.push([px(b.lo), py(b.expected)]);
    stepPts.push([px(b.hi), py(b.expected)]);
  }
  doc.polyline(stepPts, rgbCss(SERIES_COLORS[0]), 2);
  doc.text((ML + W - MR) / 2, H - 8, "duration", 12, "middle");
  for (const frac of [0, 0.5, 1]) {
    const t = tMin + frac * (tMax - tMin);
    doc.text(px(t), H - MB + 16, t.toFixed(2), 10, "middle");
    doc.text(ML - 6, py(hi * frac) + 4, Math.round(hi * frac).toString(), 10, "end");
  }
  doc.text(ML + 10, H + 12, "bars: MC counts; line: analytic expectation", 11);
  return doc.render();
}

export function overlayPng(bins: HistogramBin[]): Buffer {
  const marg = durationMarginal(bins);
  const tMin = marg[0].lo;
  const tMax = marg[marg.length - 1].hi;
  const hi = Math.max(...marg.map((b) => Math.max(b.count, b.expected))) || 1;
  const px = (t: number) => ML + ((t - tMin) / (tMax - tMin)) * (W - ML - MR);
  const py = (v: number) => MT + (1 - v / hi) * (H - MT - MB);
  const img = new Raster(W, H);
  for (const b of marg) {
    const x0 = Math.round(px(b.lo));
    const y0 = Math.round(py(b.count));
    img.fillRect(x0, y0, Math.round(px(b.hi)) - x0, Math.round(py(0)) - y0, SERIES_COLORS[1]);
  }
  for (const b of marg) {
    img.line(px(b.lo), py(b.expected), px(b.hi), py(b.expected), SERIES_COLORS[0]);
  }
  img.line(ML, MT, ML, H - MB, [0, 0, 0]);
  img.line(ML, H - MB, W - MR, H - MB, [0, 0, 0]);
  return img.encode();
}
