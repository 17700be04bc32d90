/** Viridis-style colormap from a fixed anchor table, linearly interpolated. */

const ANCHORS: Array<[number, number, number]> = [
  [68, 1, 84],
  [71, 44, 122],
  [59, 81, 139],
  [44, 113, 142],
  [33, 144, 141],
  [39, 173, 129],
  [92, 200, 99],
  [170, 220, 50],
  [253, 231, 37],
];

export function viridis(t: number): [number, number, number] {
  const u = Math.min(1, Math.max(0, t)) * (ANCHORS.length - 1);
  const k = Math.min(ANCHORS.length - 2, Math.floor(u));
  const f = u - k;
  const a = ANCHORS[k];
  const b = ANCHORS[k + 1];
  return [
    Math.round(a[0] + f * (b[0] - a[0])),
    Math.round(a[1] + f * (b[1] - a[1])),
    Math.round(a[2] + f * (b[2] - a[2])),
  ];
}

export const SERIES_COLORS: Array<[number, number, number]> = [
  [214, 39, 40], // red
  [31, 119, 180], // blue
  [44, 160, 44], // green
  [255, 127, 14], // orange
  [148, 103, 189], // purple
  [140, 86, 75], // brown
];

export function rgbCss([r, g, b]: [number, number, number]): string {
  return `rgb(${r},${g},${b})`;
}
