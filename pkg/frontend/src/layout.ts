/** Pure scatter layout: projection payload + viewport -> drawable marks.
 *
 * Coordinates are in meaningless units, so the plot shows no axes and no
 * tick values; the only promise is equal aspect (one data unit measures
 * the same number of pixels in x and y) and deterministic colors.
 */

import { colorFor } from "./palette.js";
import { ProjectionPayload } from "./types.js";

export interface Mark {
  x: number;
  y: number;
  color: string;
}

export interface Viewport {
  width: number;
  height: number;
  padding: number;
}

export interface ScatterScene {
  marks: Mark[];
  pointRadius: number;
  classCount: number;
}

export function layoutScatter(payload: ProjectionPayload, view: Viewport): ScatterScene {
  if (view.width <= 2 * view.padding || view.height <= 2 * view.padding) {
    throw new Error("viewport too small");
  }
  const xs = payload.coords.map((p) => p[0]);
  const ys = payload.coords.map((p) => p[1]);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);

  const innerW = view.width - 2 * view.padding;
  const innerH = view.height - 2 * view.padding;
  // equal aspect: one scale for both directions, degenerate spans -> 1
  const spanX = maxX - minX || 1;
  const spanY = maxY - minY || 1;
  const scale = Math.min(innerW / spanX, innerH / spanY);

  const offsetX = view.padding + (innerW - spanX * scale) / 2;
  const offsetY = view.padding + (innerH - spanY * scale) / 2;

  const marks: Mark[] = payload.coords.map((p, i) => ({
    x: offsetX + (p[0] - minX) * scale,
    y: view.height - (offsetY + (p[1] - minY) * scale), // y grows upward
    color: colorFor(payload.labels[i] ?? 0),
  }));
  return {
    marks,
    pointRadius: payload.coords.length > 500 ? 2 : 3.5,
    classCount: new Set(payload.labels).size,
  };
}
