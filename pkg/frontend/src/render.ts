/** Canvas adapter. Everything interesting happens in layout.ts; this
 * module only replays a ScatterScene onto a 2d context. No axes and
 * no coordinate labels are drawn: raters judge structure, not values.
 */

import { ScatterScene } from "./layout.js";

export interface CanvasLike {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  fillStyle: string | object;
}

export function drawScene(
  ctx: CanvasLike,
  scene: ScatterScene,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  for (const mark of scene.marks) {
    ctx.fillStyle = mark.color;
    ctx.beginPath();
    ctx.arc(mark.x, mark.y, scene.pointRadius, 0, Math.PI * 2);
    ctx.fill();
  }
}
