/** Dependency-free SVG line chart for observation series. */

import type { Series } from "./api.js";

export interface ChartGeometry {
  width: number;
  height: number;
  padLeft: number;
  padRight: number;
  padTop: number;
  padBottom: number;
}

export const DEFAULT_GEOMETRY: ChartGeometry = {
  width: 760,
  height: 320,
  padLeft: 56,
  padRight: 16,
  padTop: 12,
  padBottom: 28,
};

const PALETTE = ["#0b6db0", "#c44e52", "#55a868", "#8172b2", "#ccb974", "#64b5cd"];

export interface Scale {
  (value: number): number;
}

export function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0 || 1;
  return (value: number) => r0 + ((value - d0) / span) * (r1 - r0);
}

export function seriesExtent(list: Series[]): { t: [number, number]; v: [number, number] } | null {
  let tMin = Infinity, tMax = -Infinity, vMin = Infinity, vMax = -Infinity;
  for (const series of list) {
    for (const [t, v] of series.points) {
      if (t < tMin) tMin = t;
      if (t > tMax) tMax = t;
      if (v < vMin) vMin = v;
      if (v > vMax) vMax = v;
    }
  }
  if (tMin === Infinity) return null;
  if (vMin === vMax) {
    vMin -= 1;
    vMax += 1;
  }
  return { t: [tMin, tMax], v: [vMin, vMax] };
}

export function polylinePoints(series: Series, tScale: Scale, vScale: Scale): string {
  return series.points.map(([t, v]) => `${tScale(t).toFixed(1)},${vScale(v).toFixed(1)}`).join(" ");
}

function escapeXml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

export function formatTick(epochMs: number): string {
  return new Date(epochMs).toISOString().slice(0, 10);
}

/** Render the selected series as a complete inline-SVG document. */
export function chartSvg(selected: Series[], geometry: ChartGeometry = DEFAULT_GEOMETRY): string {
  const { width, height, padLeft, padRight, padTop, padBottom } = geometry;
  if (selected.length === 0) {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" class="chart">` +
      `<text x="${width / 2}" y="${height / 2}" text-anchor="middle" class="placeholder">` +
      `Select one or more series to chart</text></svg>`
    );
  }
  const extent = seriesExtent(selected)!;
  const tScale = linearScale(extent.t[0], extent.t[1], padLeft, width - padRight);
  const vScale = linearScale(extent.v[0], extent.v[1], height - padBottom, padTop);

  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" class="chart">`,
    `<line x1="${padLeft}" y1="${padTop}" x2="${padLeft}" y2="${height - padBottom}" class="axis"/>`,
    `<line x1="${padLeft}" y1="${height - padBottom}" x2="${width - padRight}" y2="${height - padBottom}" class="axis"/>`,
  ];

  for (const fraction of [0, 0.5, 1]) {
    const v = extent.v[0] + fraction * (extent.v[1] - extent.v[0]);
    const t = extent.t[0] + fraction * (extent.t[1] - extent.t[0]);
    parts.push(
      `<text x="${padLeft - 6}" y="${vScale(v).toFixed(1)}" text-anchor="end" class="tick">${+v.toFixed(2)}</text>`,
      `<text x="${tScale(t).toFixed(1)}" y="${height - padBottom + 16}" text-anchor="middle" class="tick">${formatTick(t)}</text>`,
    );
  }

  selected.forEach((series, i) => {
    const color = PALETTE[i % PALETTE.length];
    parts.push(
      `<polyline fill="none" stroke="${color}" stroke-width="1.5" points="${polylinePoints(series, tScale, vScale)}"/>`,
    );
    for (const [t, v] of series.points) {
      parts.push(
        `<circle cx="${tScale(t).toFixed(1)}" cy="${vScale(v).toFixed(1)}" r="2.5" fill="${color}"/>`,
      );
    }
    const label = `${series.label}${series.unit ? ` (${series.unit})` : ""}`;
    parts.push(
      `<circle cx="${padLeft + 8}" cy="${padTop + 10 + i * 16}" r="4" fill="${color}"/>`,
      `<text x="${padLeft + 18}" y="${padTop + 14 + i * 16}" class="legend">${escapeXml(label)}</text>`,
    );
  });
  parts.push("</svg>");
  return parts.join("");
}
